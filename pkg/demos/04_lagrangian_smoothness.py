import numpy as np

from lowmach.analysis import derivative_probe
from lowmach.domain import DomainSpec, ScalarField, VectorField, sobolev_norm
from lowmach.eos import Eos
from lowmach.lagrange import density_from_jacobian, psi_t

# ### Following the particles
#
# The compressible solver can carry a flow map along with (u, f).  The
# Jacobian of that map then predicts the density: volume that stretches
# gets lighter.

d = DomainSpec.torus(32, 2 * np.pi)
eos = Eos(1e3)
u0 = VectorField.from_function(d, lambda X, Y: np.sin(X) * np.cos(Y),
                               lambda X, Y: -np.cos(X) * np.sin(Y))
f0 = ScalarField.from_function(d, lambda X, Y: np.cos(X) * np.cos(Y) / 1e3)
res = psi_t(u0, f0.map(np.exp), eos, 0.3)

carried = density_from_jacobian(res.flow, f0)
in_place = density_from_jacobian(res.flow, f0, transport_initial=False)
print("f vs f0 o zeta^-1 - log J o zeta^-1:", sobolev_norm(res.state.f - carried, 0))
print("f vs f0 - log J o zeta^-1 (f0 left in place):", sobolev_norm(res.state.f - in_place, 0))

# ### Smooth dependence on the data
#
# Perturb the data by lambda (z0, h0) and form central difference quotients
# of the solution map.  If the map is smooth, successive quotients differ by
# O(lambda^2), so halving lambda cuts the gap by four.

z0 = VectorField.from_function(d, lambda X, Y: np.cos(2 * Y), lambda X, Y: np.sin(X))
h0 = ScalarField.from_function(d, lambda X, Y: np.sin(X - Y) / 1e3)
rep = derivative_probe(u0, f0, z0, h0, eos, 0.3, [0.1, 0.05, 0.025])
print("Lagrangian H3 gaps:", ["%.3e" % v for v in rep.lagrangian_h3],
      "ratios", ["%.2f" % r for r in rep.ratios("lagrangian_h3")])
print("Eulerian H3 gaps:  ", ["%.3e" % v for v in rep.eulerian_h3],
      "ratios", ["%.2f" % r for r in rep.ratios("eulerian_h3")])

# With band-limited data at this resolution both pictures look smooth; the
# Eulerian loss of a derivative needs rough data (see the Burgers demo).
