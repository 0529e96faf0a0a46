"""
Choosing the detection threshold
================================

Trains a random forest on one benchmark, scores a second one, and compares
candidate threshold margins by the worst-case false-positive and
false-negative counts inside each margin. Then checks the tuned detector on
a fresh attacked drive.
"""
# %%
import numpy as np

from avaba.classifiers import train
from avaba.detector import DetectorConfig, detect_batch, score_distribution, tune_threshold
from avaba.dynamics import VehicleParams
from avaba.features import build_features, concat_matrices
from avaba.simulate import AttackScript, Obstacle, Scenario, simulate_attack, synthetic_benchmark

car = VehicleParams()


def featurize(recs):
    return concat_matrices([build_features(r.frames, car) for r in recs])


train_m = featurize(synthetic_benchmark(10000, seed=1))
held_out = featurize(synthetic_benchmark(6000, seed=2))
model = train("rf", train_m, seed=0)

# %%
normal_h, attack_h = score_distribution(model, held_out, bins=10)
print(" bin          normal  abnormal")
for (lo, hi, cn), (_, _, ca) in zip(normal_h.rows(), attack_h.rows()):
    print(f"[{lo:.1f}, {hi:.1f})  {cn:7d}  {ca:8d}")

# %%
scores = model.predict_proba(held_out)
result = tune_threshold(scores[held_out.labels == 0], scores[held_out.labels == 1])
for rep in result.reports:
    print(f"{rep.label():>9}  FP {rep.normal_misclassified:4d} ({rep.fp_rate:.4f})  FN {rep.attack_misclassified:4d} ({rep.fn_rate:.4f})")
print("threshold:", result.threshold)

# %%
drive = Scenario(duration=20.0, obstacles=(Obstacle(3.0, 2.5, 0.0, 5.0), Obstacle(12.0, 3.0, 0.0, 6.0)), seed=5)
frames, log = simulate_attack(car, drive, AttackScript(((12.0, 17.99),)))
fm = build_features(frames, car)
_, alarms = detect_batch(DetectorConfig(result.threshold, model), fm.X)
truth = fm.labels.astype(bool)
print(f"alarms {alarms.sum()}, attacked frames {truth.sum()}, overlap {np.sum(alarms & truth) / np.sum(alarms | truth):.3f}")
