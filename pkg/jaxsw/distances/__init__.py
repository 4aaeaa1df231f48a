from .maxsliced import msw1, msw1_grid
from .sliced import sw_hat, sw_p, sw_p_pow, sw_tilde_p_pow

# distance kinds accepted on the command line
distances = {
    "sw": sw_p,
    "sw-hat": sw_hat,
    "sw-tilde": sw_tilde_p_pow,
    "msw1": msw1,
}
