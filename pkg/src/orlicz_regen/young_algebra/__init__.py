"""Young functions, their conjugates and the derived functions rho, zeta, eta, kappa."""

from .functions import (
    INF,
    Barrier,
    Composed,
    ExpPower,
    InverseOf,
    Linear,
    Normalized,
    OverX,
    Power,
    PowerLog,
    Tabulated,
    YoungFunction,
    from_config,
)
from .transforms import (
    Conjugate,
    Rho,
    SupTransform,
    Zeta,
    assumption_A_violations,
    conjugate,
    eta_nu,
    eta_pi,
    improvement_factor,
    kappa_of,
    log_sup,
    rho_of,
    tabulate,
    tilde_phi,
    vanishes_linearly,
    zeta_of,
)
