"""
Patient-exclusive three-fold cross-validation
=============================================

Three patient sets rotate through the train, validation and test roles, so
no patient is ever seen in two roles of the same fold.
"""

from cribra.errors import PatientOverlap
from cribra.evaluation import ROLES, SvmRecipe, build_fold_plan, run_cv
from cribra.spatial_features import tile_features
from cribra.synthgen import generate, iter_dataset_specs, patient_ids

pats = patient_ids(6)
samples = [tile_features(generate(s)[0]) for s in iter_dataset_specs(pats, 15, seed=4)]
sets = [pats[0:2], pats[2:4], pats[4:6]]
plan = build_fold_plan(samples, sets)

for fold in range(plan.n_folds):
    print(f"fold {fold + 1}:", {role: sorted(plan.patients(fold, role)) for role in ROLES})

report = run_cv(samples, plan, SvmRecipe(), n_per_class=20, unseen_per_class=5)
print(report.to_table())

# putting a patient in two sets is refused outright
try:
    build_fold_plan(samples, [pats[0:2], pats[1:4], pats[4:6]])
except PatientOverlap as err:
    print("refused:", err)
