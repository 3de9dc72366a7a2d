"""Discrete CMC surfaces of revolution in the three space forms, with their conserved quantities."""
from isonet import generators as gen
from isonet.conserved import baecklund_values, mean_curvature, verify_cq

for kappa, seed in ((-1.0, (0.4, -0.3)), (0.0, (1.0, 0.0)), (1.0, (1.0, 0.0))):
    s = gen.revolution_seed_for(*seed, 0.2, kappa, 0.7, N=12)
    rv = gen.revolution_net(s, 20)
    rep = verify_cq(rv.net, rv.cq)
    H = mean_curvature(rv.cq)
    roots = baecklund_values(rv.cq)
    print(f"kappa={kappa:+.0f}: net {rv.net.shape}, first-integral drift {rv.H_kappa_drift:.1e}, "
          f"cq residual {rep.max_residual:.1e}, H={H.H:.4f}, Baecklund values {[round(r, 6) for r in roots.roots]}")
