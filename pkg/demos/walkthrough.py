"""A short tour: transforms, norms, a tower chain, a bound check and a CLT run."""

import math

from orlicz_regen import limit_experiments as le
from orlicz_regen.bound_verifier import verify_thm_nu, verify_thm_pi
from orlicz_regen.orlicz_norm import orlicz_norm
from orlicz_regen.tower_chain import build, geometric_tower
from orlicz_regen.young_algebra import Power, rho_of, zeta_of

phi, psi = Power(2.0), Power(4.0)
rho, zeta = rho_of(phi, psi), zeta_of(phi, psi)
print(f"rho(1)  = {float(rho(1.0)):.10f}   closed form 2/(3 sqrt 3) = {2 / (3 * math.sqrt(3)):.10f}")
print(f"zeta(1) = {float(zeta(1.0)):.10f}   closed form 4/27         = {4 / 27:.10f}")

# tower chain: climb to height h, then regenerate; f = +-1 on alternate atoms
system = build(geometric_tower(max_height=20))
chain, laws = system
print(f"\npi(C) = {laws.pi_C:.6f}, E_nu(tau+1) = {laws.E_nu_tau_plus_1:.6f}, E_pi f = {laws.E_pi_f()}")
print(f"||tau+1||_psi = {orlicz_norm(laws.tau_plus_1_law, psi).value:.6f}")

for rep in (verify_thm_nu(system, phi, psi), verify_thm_pi(system, phi, psi)):
    print(f"{rep.theorem_id:10s} lhs {rep.lhs:9.4f}  rhs {rep.rhs:9.4f}  ratio {rep.ratio:.3f}  {rep.status}")

r = le.clt_experiment(chain, n_values=(1000, 10000), replicas=1000, seed=1)
print(f"\nsigma_f^2 from blocks = {r.sigma_f_sq:.4f}")
for row in r.rows():
    print(f"n = {row['n']:6d}  KS = {row['ks_distance']:.4f}  var(n^-1/2 sum f) = {row['normalized_variance']:.4f}")
