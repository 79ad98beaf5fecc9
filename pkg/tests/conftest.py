import numpy as np
import pytest

import ptgsr


def random_graph(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 1.0, (n, n))
    return ptgsr.build_graph((w + w.T) / 2.0)


def random_basis(n, seed):
    return ptgsr.gft_basis(ptgsr.laplacian(random_graph(n, seed)))


@pytest.fixture
def basis20():
    return random_basis(20, 1234)


def make_stream(basis, m, s_count, bandwidth, sigma2, T, seed, policy="static"):
    """(A_stack, Y, truth, noise) for one trial, paired across algorithms."""
    gt = ptgsr.synth_bandlimited(basis, bandwidth, seed)
    noise = ptgsr.NoiseModel(covariance=np.full(m, sigma2), seed=seed)
    op0 = ptgsr.make_operator(basis, m, s_count, seed)
    if policy == "per_iteration":
        ops = [ptgsr.resample(op0, basis, "per_iteration", n) for n in range(T)]
        a_stack = np.stack([o.composite for o in ops])
    else:
        ops = [op0] * T
        a_stack = op0.composite[None]
    Y = np.stack([ptgsr.observe(ops[n], gt.s_true, noise, n) for n in range(T)])
    return a_stack, Y, gt, noise
