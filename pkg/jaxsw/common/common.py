import functools
from multiprocessing.pool import ThreadPool
from typing import Any, Callable, List, Sequence

import flax
import jax
import jax.numpy as jnp
import numpy as np
import tqdm

from jaxsw.common.errors import InvalidParameterError
from jaxsw.common.typing import PRNGKey

nonpytree_field = functools.partial(flax.struct.field, pytree_node=False)

# number of directions handled by one compiled call
DEFAULT_BATCH_SIZE = 256


def key_from_seed(seed: int) -> PRNGKey:
    """Turns a 64-bit integer seed into a PRNG key.

    Seeds in [2^63, 2^64) are reinterpreted as signed so that the full unsigned
    64-bit range maps to distinct keys.
    """
    seed = int(seed)
    if not -(2**63) <= seed < 2**64:
        raise InvalidParameterError(f"seed {seed} does not fit in 64 bits")
    if seed >= 2**63:
        seed -= 2**64
    return jax.random.PRNGKey(seed)


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed for replicate `index`, via `fold_in`."""
    key = jax.random.fold_in(key_from_seed(seed), index)
    hi, lo = np.asarray(jax.random.bits(key, (2,), jnp.uint32)).astype(np.uint64)
    return int((hi << np.uint64(32)) | lo)


def parallel_map(
    fn: Callable,
    items: Sequence[Any],
    num_workers: int = 1,
    progress: bool = False,
    desc: str = None,
) -> List[Any]:
    """Maps `fn` over `items` with up to `num_workers` threads.

    Results come back in the order of `items` whatever the worker count, so any
    reduction over them is reproducible.
    """
    items = list(items)
    if num_workers <= 1:
        return [fn(x) for x in tqdm.tqdm(items, desc=desc, disable=not progress)]
    with ThreadPool(num_workers) as p:
        return list(
            tqdm.tqdm(
                p.imap(fn, items), total=len(items), desc=desc, disable=not progress
            )
        )


def map_in_batches(fn: Callable, xs: jnp.ndarray, batch_size: int = DEFAULT_BATCH_SIZE):
    """Applies a batched function to `xs` in fixed-size chunks along axis 0.

    The last chunk is padded with copies of the first row so every call has the
    same shape (one compilation); padded outputs are dropped.
    """
    n = xs.shape[0]
    outs = []
    for start in range(0, n, batch_size):
        chunk = xs[start : start + batch_size]
        valid = chunk.shape[0]
        if valid < batch_size and n > batch_size:
            pad = jnp.repeat(xs[:1], batch_size - valid, axis=0)
            chunk = jnp.concatenate([chunk, pad], axis=0)
        out = fn(chunk)
        outs.append(jax.tree_util.tree_map(lambda o: o[:valid], out))
    return jax.tree_util.tree_map(lambda *o: jnp.concatenate(o, axis=0), *outs)
