"""Christoffel, Calapso and Darboux transforms of a discrete catenoid."""
import numpy as np

from isonet import generators as gen
from isonet.net import concircularity_residuals, quad_cross_ratios
from isonet.transforms import calapso, christoffel, darboux

net = gen.discrete_catenoid(8, 20)
q = quad_cross_ratios(net)
print(f"catenoid {net.shape}: concircularity {concircularity_residuals(net).max():.1e}")

dual = christoffel(net)
print(f"Christoffel dual: cross-ratio change {np.abs(quad_cross_ratios(dual) - q).max():.1e}")

res = calapso(net, 0.2)
print(f"Calapso lambda=0.2: concircularity {concircularity_residuals(res.net).max():.1e}")

dx = darboux(net, 0.3, net.vertices[0, 0] + np.array([0.3, 0.2, 0.4]), fstar=dual)
print(f"Darboux mu=0.3: Riccati residual {dx.riccati_residual:.1e}, "
      f"cross-ratio change {np.abs(quad_cross_ratios(dx.net) - q).max():.1e}")
