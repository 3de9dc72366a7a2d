"""A Bryant cousin of Enneper in hyperbolic space and a sampled maximal catenoid in R^{2,1}."""
import numpy as np

from isonet import generators as gen
from isonet.netfile import ball_points

b = gen.bryant_net(gen.dhf_linear(0.2, 7, 7, -3, -3), 0.3)
P = ball_points(b.net.vertices, -1.0)
print(f"Bryant cousin {b.net.shape}: max |x| in the ball {np.linalg.norm(P, axis=-1).max():.4f}")

w, zmap, dzmap = gen.annulus_grid(0.5, 2.0, 9, 16)
k = gen.kobayashi_sample(lambda z: z, lambda z: z**-2, w, zmap, dzmap, periodic_n=True)
print(f"maximal catenoid sample {k.f.shape[:2]}: loop closure {k.loop_residual:.1e}, "
      f"{int(k.singular.sum())} samples on the singular circle |z| = 1")
