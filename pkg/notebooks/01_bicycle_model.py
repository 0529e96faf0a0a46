"""
Lateral bicycle model of a small car
====================================

Builds the lateral state-space model for the default (QCar-sized) vehicle,
compares both conventions for the yaw-damping entry, and checks the
explicit-Euler predictor against the exact matrix-exponential solution.
"""
# %%
import numpy as np
from scipy.linalg import expm

from avaba.dynamics import (
    QCAR_PUBLISHED,
    SUM_FORM,
    ControlInput,
    KinematicState,
    LateralState,
    VehicleParams,
    kinematic_rates,
    predict_next_state,
    system_matrices,
    tire_forces,
)

car = VehicleParams()
print(car)

# %% [markdown]
# The six matrix entries, as the formulas give them and in sum form, next to
# the rounded values usually quoted for this car.

# %%
printed = system_matrices(car)
summed = system_matrices(car, SUM_FORM)
print("entry  formula    sum-form   quoted")
for name in "abcdef":
    print(f"{name.upper():>5}  {getattr(printed, name):9.4f}  {getattr(summed, name):9.4f}  {getattr(QCAR_PUBLISHED, name):7.4f}")

# %% [markdown]
# Tire forces under a small lateral drift, with and without counter-steer.

# %%
for delta in (0.0, 0.1):
    t = tire_forces(car, LateralState(0.1, 0.0), ControlInput(delta))
    print(f"delta={delta}: alpha_f={t.alpha_f:.3f} alpha_r={t.alpha_r:.3f} F_yf={t.fyf:.3f} F_yr={t.fyr:.3f}")

print("kinematics at beta=0.1:", np.round(kinematic_rates(KinematicState(beta=0.1, v=1.0), car), 5))

# %% [markdown]
# One Euler step from rest with 0.1 rad of steering, then the global error
# over one second for two step sizes. Halving dt halves the error.

# %%
print(predict_next_state(QCAR_PUBLISHED, LateralState(0.0, 0.0), 0.1, 0.01))


def horizon_error(ss, dt):
    x = LateralState(0.1, 0.2)
    for _ in range(int(round(1 / dt))):
        x = predict_next_state(ss, x, 0.1, dt)
    M = np.zeros((3, 3))
    M[:2, :2], M[:2, 2] = ss.matrix, ss.input * 0.1
    exact = (expm(M) @ [0.1, 0.2, 1.0])[:2]
    return float(np.hypot(x.vy - exact[0], x.r - exact[1]))


for dt in (0.02, 0.01, 0.005):
    print(f"dt={dt:<6} error={horizon_error(summed, dt):.3e}")
