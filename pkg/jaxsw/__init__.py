import jax

# exact 1D transport and the oracle tolerances need double precision
jax.config.update("jax_enable_x64", True)
