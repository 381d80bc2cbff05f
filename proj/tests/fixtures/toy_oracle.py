"""Writes the 10-sample toy evaluation fixture and its hand-computed metrics.

Truth flies north at 2.5 m/s along the reference line from (0, 0) to (10, 0);
estimates sit between truth epochs with small fixed offsets. Every metric is
computed here with plain arithmetic, independently of the C++ code.
"""
import json
import math
from pathlib import Path

here = Path(__file__).parent

truth = []
for k in range(11):
    t = 0.1 * k
    # The velocity column drops below the cruise threshold for the last epochs;
    # only the cruise mask reads it.
    truth.append(dict(t=t, pn=2.5 * t, pe=0.0, pd=-10.0, vn=2.5 if k < 8 else 1.0, ve=0.0, vd=0.0,
                      roll=0.0, pitch=-0.05, yaw=0.0))

east = [0.30, -0.20, 0.10, 0.45, -0.35, 0.05, 0.25, -0.15, 0.40, -0.10]
north = [0.10, 0.00, -0.20, 0.05, 0.15, -0.05, 0.00, 0.20, -0.10, 0.10]
down = [0.5, 0.4, 0.3, 0.2, 0.1, 0.0, -0.1, -0.2, -0.3, -0.4]
roll = [0.010, 0.014, 0.008, 0.012, 0.020, 0.006, 0.011, 0.015, 0.009, 0.013]
pitch = [-0.050, -0.046, -0.054, -0.049, -0.043, -0.057, -0.050, -0.047, -0.052, -0.048]

est = []
for k in range(10):
    t = 0.1 * k + 0.05
    tn = 2.5 * t
    est.append(dict(t=t, pn=tn + north[k], pe=east[k], pd=-10.0 + down[k],
                    vn=2.5, ve=0.0, vd=0.0, roll=roll[k], pitch=pitch[k], yaw=0.0))

with open(here / "toy_truth.csv", "w") as f:
    f.write("t,pos_n,pos_e,pos_d,vel_n,vel_e,vel_d,q0,q1,q2,q3,roll,pitch,yaw\n")
    for r in truth:
        q = (math.cos(r["pitch"] / 2), 0.0, math.sin(r["pitch"] / 2), 0.0)
        f.write(f"{r['t']:.6f},{r['pn']!r},{r['pe']!r},{r['pd']!r},{r['vn']!r},{r['ve']!r},{r['vd']!r},"
                f"{q[0]!r},{q[1]!r},{q[2]!r},{q[3]!r},{r['roll']!r},{r['pitch']!r},{r['yaw']!r}\n")

with open(here / "toy_navlog.csv", "w") as f:
    f.write("t,roll,pitch,yaw,vel_n,vel_d,vel_e,pos_n,pos_d,pos_e\n")
    for r in est:
        f.write(f"{r['t']:.6f},{r['roll']!r},{r['pitch']!r},{r['yaw']!r},{r['vn']!r},{r['vd']!r},{r['ve']!r},"
                f"{r['pn']!r},{r['pd']!r},{r['pe']!r}\n")

# Truth interpolated to the estimate epochs (motion is linear, so exact).
tn = [2.5 * r["t"] for r in est]
n = len(est)
mean_n = sum(r["pn"] for r in est) / n
mean_e = sum(r["pe"] for r in est) / n
scatter = math.sqrt(sum((r["pn"] - mean_n) ** 2 + (r["pe"] - mean_e) ** 2 for r in est) / n)
span_n = max(r["pn"] for r in est) - min(r["pn"] for r in est)
span_e = max(r["pe"] for r in est) - min(r["pe"] for r in est)

# Reference line (0, 0) -> (10, 0): all estimates project inside it, so the
# cross-track distance is |east|.
xt = [abs(r["pe"]) for r in est]

rmse_n = math.sqrt(sum((est[k]["pn"] - tn[k]) ** 2 for k in range(n)) / n)
rmse_e = math.sqrt(sum(est[k]["pe"] ** 2 for k in range(n)) / n)
rmse_d = math.sqrt(sum(down[k] ** 2 for k in range(n)) / n)
final = math.sqrt(north[-1] ** 2 + east[-1] ** 2 + down[-1] ** 2)

# Attitude smoothness: pooled std of roll and pitch increments between
# consecutive cruise epochs, each axis about its own mean.
true_speed = []
for r in est:
    k = int(r["t"] / 0.1)
    w = (r["t"] - truth[k]["t"]) / 0.1
    true_speed.append(truth[k]["vn"] + w * (truth[k + 1]["vn"] - truth[k]["vn"]))
cruise = [s >= 2.0 for s in true_speed]
dr, dp = [], []
for k in range(1, n):
    if cruise[k] and cruise[k - 1]:
        dr.append(roll[k] - roll[k - 1])
        dp.append(pitch[k] - pitch[k - 1])
m = len(dr)
mr, mp = sum(dr) / m, sum(dp) / m
ss = sum((x - mr) ** 2 for x in dr) + sum((x - mp) ** 2 for x in dp)
smooth = math.sqrt(ss / (2 * (m - 1)))

expected = dict(
    reference_path=[[0.0, 0.0, -10.0], [10.0, 0.0, -10.0]],
    samples=n,
    cruise_epochs=sum(cruise),
    horizontal_scatter_m=scatter,
    inside_box_1_25=span_n <= 2.5 and span_e <= 2.5,
    max_cross_track_m=max(xt),
    mean_cross_track_m=sum(xt) / n,
    rmse_north_m=rmse_n,
    rmse_east_m=rmse_e,
    rmse_down_m=rmse_d,
    final_error_m=final,
    attitude_increment_std_rad=smooth,
)
with open(here / "toy_expected.json", "w") as f:
    json.dump(expected, f, indent=2)
    f.write("\n")
