"""Dataset + model + training recipes for each named experiment."""

from __future__ import annotations

import numpy as np

from ..bilip import BiLipModel, ConditionedBiLipModel
from ..pl import PLNet, anchor_minimum, empirical_bilip, f_eval, global_min_info, inflate_box
from ..solvers import SolverConfig
from .config import ExperimentSpec
from .data import Dataset, gen_rosenbrock2d, gen_rosenbrock_nd, gen_step, rosenbrock, rosenbrock_nd, sine_term
from .train import ExperimentResult, TrainConfig, train

TRAIN_STREAM, TEST_STREAM = 0, 1


def make_data(spec: ExperimentSpec) -> tuple[Dataset, Dataset]:
    def gen(count, stream):
        if spec.experiment == "step":
            return gen_step(count, spec.seed, stream)
        if spec.experiment == "rbNd":
            return gen_rosenbrock_nd(spec.dim, count, spec.seed, stream)
        variant = {"rb2d": "plain", "rb2d-sine": "plus_sine", "rb2d-param": "parametric"}[spec.experiment]
        return gen_rosenbrock2d(variant, count, spec.seed, stream)

    return gen(spec.n_train, TRAIN_STREAM), gen(spec.n_test, TEST_STREAM)


def make_model(spec: ExperimentSpec, data: Dataset):
    """Untrained model for ``spec``; a PL network for every Rosenbrock variant."""
    widths = (spec.width,) * spec.depth
    g = BiLipModel.build(data.n, spec.K, widths, spec.mu, spec.nu, spec.activation, spec.orthogonal, seed=spec.seed)
    if spec.experiment == "step":
        g.domain = data.box.copy()
        return g
    domain = inflate_box(data.box)
    g.domain = domain
    c = float(np.min(data.targets))
    if spec.experiment == "rb2d-param":
        cg = ConditionedBiLipModel(g, data.cond_dim, spec.hidden, seed=spec.seed)
        return PLNet(cg, c, domain, data.cond_box)
    net = PLNet(g, c, domain)
    if spec.anchor_min:
        # start with the minimizer at the best training input, consistent with c = min target
        net = anchor_minimum(net, data.x[int(np.argmin(data.targets))])
    return net


def train_config(spec: ExperimentSpec) -> TrainConfig:
    return TrainConfig(
        epochs=spec.epochs,
        batch_size=spec.batch_size,
        peak_lr=spec.lr,
        seed=spec.seed,
        start_frac=spec.start_frac,
        end_frac=spec.end_frac,
        certify_every=spec.certify_every,
    )


def true_objective(spec: ExperimentSpec, x, p=None) -> np.ndarray:
    x = np.atleast_2d(x)
    if spec.experiment == "rbNd":
        return rosenbrock_nd(x)
    if spec.experiment == "rb2d-param":
        p = np.atleast_2d(p)
        return rosenbrock(x[:, 0], x[:, 1], p[:, 0], p[:, 1])
    val = rosenbrock(x[:, 0], x[:, 1])
    if spec.experiment == "rb2d-sine":
        val = val + sine_term(x[:, 0], x[:, 1])
    return val


def param_probe(count: int = 10, seed: int = 0) -> np.ndarray:
    """Fixed probe set of conditions ``(a, b)`` in ``[-1, 1]^2``."""
    return np.random.default_rng([seed, 99]).uniform(-1.0, 1.0, (count, 2))


def summarize_minimum(spec: ExperimentSpec, net: PLNet, data: Dataset, cfg: SolverConfig) -> dict:
    """Location and quality of the surrogate's global minimum."""
    if net.conditioned:
        probe = param_probe(10, spec.seed)
        info = global_min_info(net, cfg, probe)
        x_star = info.x
        truth = np.stack([probe[:, 0], probe[:, 1] * probe[:, 0] ** 2], axis=1)
        return {
            "iterations": info.iterations,
            "conditions": probe.tolist(),
            "x_star": x_star.tolist(),
            "f_star": f_eval(net, x_star, probe).tolist(),
            "true_at_x_star": true_objective(spec, x_star, probe).tolist(),
            "mean_dist_to_true_min": float(np.mean(np.linalg.norm(x_star - truth, axis=1))),
        }
    info = global_min_info(net, cfg)
    x_star = info.x
    out = {
        "iterations": info.iterations,
        "layer_iterations": [r.iterations for r in info.layers],
        "x_star": x_star.tolist(),
        "f_star": f_eval(net, x_star),
        "c": net.c,
        "true_at_x_star": float(true_objective(spec, x_star)[0]),
        "dist_to_true_min": float(np.linalg.norm(x_star - 1.0)),
        "min_train_target": float(np.min(data.targets)),
    }
    return out


def run_experiment(spec: ExperimentSpec, log=None) -> tuple[object, ExperimentResult]:
    data, test = make_data(spec)
    model = make_model(spec, data)
    model, result = train(model, data, train_config(spec), test, spec.experiment, log)
    result.config = spec.as_dict()
    g = model.g if isinstance(model, PLNet) else model
    domain = data.box if spec.experiment == "step" else None
    lo, hi = empirical_bilip(g, spec.verify_samples, seed=spec.seed, domain=domain, cond_domain=data.cond_box)
    result.empirical_inv_lip, result.empirical_lip = lo, hi
    if isinstance(model, PLNet):
        result.solver = summarize_minimum(spec, model, data, spec.solver_config())
    return model, result
