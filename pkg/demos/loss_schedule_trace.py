"""
The cyclic loss schedule, as plot-ready data
============================================

Training rotates through four objectives -- density fit, zeta spread,
pairwise ratio mean, pairwise ratio spread -- with smooth crossfades.
This writes one cycle of the weight trajectory to CSV so it can be
plotted with any tool.
"""

from floz import LossSchedule, schedule_weights

sched = LossSchedule(cycle_period=100, transition=0.05)

with open("loss_schedule.csv", "w", encoding="utf-8") as fh:
    fh.write("epoch,w_density,w_spread,w_ratio_mean,w_ratio_spread\n")
    for epoch in range(sched.cycle_period):
        w = schedule_weights(epoch, sched)
        fh.write(f"{epoch}," + ",".join(f"{x:.6f}" for x in w) + "\n")

print("wrote loss_schedule.csv (one full cycle)")
for epoch in (0, 20, 22, 25, 45, 50, 70, 95):
    print(epoch, schedule_weights(epoch, sched))
