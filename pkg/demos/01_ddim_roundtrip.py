"""DDIM inversion round trips on the exactly solvable affine denoiser.

The affine toy predicts noise for a point-mass data distribution, so every
piece of the sampler has a closed form.  This script inverts a latent with
both inversion modes and reports how well re-sampling reproduces it, and
how the approximate mode's error shrinks as the visited step count grows.
"""

import numpy as np

from videoswap.ddim_engine import InversionMode, default_visited_steps, invert, sample
from videoswap.schedule import make_linear_schedule
from videoswap.tensor_core import Tensor4
from videoswap.toy_denoiser import AffineDenoiser, Condition


def roundtrip(z0, cond, schedule, steps, mode):
    d = AffineDenoiser()
    up = invert(d, z0, cond, schedule, steps, mode)
    down = sample(d, up.final, cond, schedule, list(reversed(steps)))
    return down.final.max_abs_diff(z0)


def main():
    rng = np.random.default_rng(0)
    mu = Tensor4(rng.standard_normal((1, 4, 16, 16)).astype(np.float32))
    z0 = Tensor4(mu.data + 0.5 * rng.standard_normal(mu.shape).astype(np.float32))
    cond = Condition(id="demo", mu=mu)

    base = make_linear_schedule(1000, 1e-4, 0.02)
    print("visited  approx-error   exact-error")
    for count in (10, 25, 50):
        steps = default_visited_steps(1000, count)
        # inversion needs the invertible tail: alpha-bar(0) := alpha-bar at
        # the lowest visited step, so the final step is the identity
        s = base.with_final_alpha_bar(base.abar(steps[0]))
        approx = roundtrip(z0, cond, s, steps, InversionMode(mode="approx"))
        exact = roundtrip(
            z0, cond, s, steps, InversionMode(mode="exact", tol=1e-6, max_iter=500)
        )
        print(f"{count:7d}  {approx:12.3e}  {exact:12.3e}")
    print("\nexact mode solves each step to machine-level residual; the")
    print("approximate mode's local-linearity error shrinks with more steps.")


if __name__ == "__main__":
    main()
