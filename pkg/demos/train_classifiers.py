"""
SVM, MLP and embedding fusion
=============================

Train both classifiers on nuclei features from synthetic tiles, then
append a random 8-wide "embedding" to show fusion.
"""

import numpy as np

from cribra.classifiers.fusion import EmbeddingTable, fused_matrix
from cribra.classifiers.mlp import MlpConfig, train_mlp
from cribra.classifiers.svm import train_svm
from cribra.spatial_features import tile_features
from cribra.synthgen import generate, iter_dataset_specs, patient_ids

train = [tile_features(generate(s)[0]) for s in iter_dataset_specs(patient_ids(2), 20, seed=1)]
test = [tile_features(generate(s)[0]) for s in iter_dataset_specs(patient_ids(2, "HOLD"), 20, seed=2)]
X, y = np.vstack([f.values for f in train]), np.array([f.label.sign for f in train])
Xt, yt = np.vstack([f.values for f in test]), np.array([f.label.sign for f in test])

svm = train_svm(X, y)
print(f"SVM: {len(svm.alphas)} support vectors, test accuracy {np.mean(svm.predict(Xt) == yt):.3f}")

# MLP labels are 0/1, with 1 meaning cribriform
mlp = train_mlp(X, (y > 0).astype(int), MlpConfig(epochs=100))
print(f"MLP: final loss {mlp.loss_history[-1]:.4f}, test accuracy {np.mean(mlp.predict(Xt) == (yt > 0)):.3f}")

rng = np.random.default_rng(0)
emb = EmbeddingTable("random8", 8, {f.tile_id: rng.normal(size=8) for f in train + test})
Xf = fused_matrix(train, [emb])
print("fused width", Xf.shape[1])
fused = train_mlp(Xf, (y > 0).astype(int), MlpConfig(epochs=100))
print(f"fused MLP test accuracy {np.mean(fused.predict(fused_matrix(test, [emb])) == (yt > 0)):.3f}")
