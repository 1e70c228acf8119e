"""Minibatch training with Adam, a one-cycle schedule and an L2 loss."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..bilip import ConditionedBiLipModel
from ..errors import CertificationError, DimensionError, NumericalError
from ..numerics import ad
from ..numerics.tape import Tape
from ..params import flatten, unflatten
from ..pl import PLNet
from .data import Dataset
from .optim import Adam, one_cycle


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    peak_lr: float = 1e-2
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    start_frac: float = 0.01
    end_frac: float = 0.0
    certify_every: int = 1


RESULT_FORMAT, RESULT_VERSION = "plnet-result", 1


@dataclass
class ExperimentResult:
    experiment: str
    seed: int
    epochs: int
    steps: int
    initial_train_loss: float
    initial_test_loss: float | None
    train_loss: float
    test_loss: float | None
    loss_history: list[float]
    mu: float
    nu: float
    tau: float
    wall_time: float
    empirical_inv_lip: float | None = None
    empirical_lip: float | None = None
    solver: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def core(self) -> dict:
        """Fields that must reproduce bit for bit from (config, seed)."""
        return {
            "initial_train_loss": self.initial_train_loss,
            "train_loss": self.train_loss,
            "test_loss": self.test_loss,
            "loss_history": list(self.loss_history),
            "solver_iterations": self.solver.get("iterations"),
        }

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps({"format": RESULT_FORMAT, "version": RESULT_VERSION, **self.as_dict()}, indent=2, sort_keys=True)


def _cond_dim(model) -> int:
    g = model.g if isinstance(model, PLNet) else model
    return g.cond_dim if isinstance(g, ConditionedBiLipModel) else 0


def _split(model, data: Dataset):
    if data.cond_dim != _cond_dim(model):
        raise DimensionError(f"dataset has {data.cond_dim} condition columns, model expects {_cond_dim(model)}")
    if data.n != model.n:
        raise DimensionError(f"dataset points have dimension {data.n}, model expects {model.n}")
    return data.x, data.p


def _predict(model, params, X, P):
    if isinstance(model, (PLNet, ConditionedBiLipModel)):
        return model.apply(params, X, P)
    return model.apply(params, X)


def _targets(model, Y: np.ndarray) -> np.ndarray:
    if isinstance(model, PLNet):
        if Y.ndim == 2 and Y.shape[1] != 1:
            raise DimensionError(f"a PL network fits scalar targets, got shape {Y.shape}")
        return Y.reshape(-1)
    if Y.shape[1] != model.n:
        raise DimensionError(f"targets have {Y.shape[1]} columns, model outputs {model.n}")
    return Y


def mse(model, X, Y, P=None, chunk: int = 5000) -> float:
    """Mean squared error of the stored parameters over a dataset."""
    Y = _targets(model, Y)
    total = 0.0
    for lo in range(0, len(X), chunk):
        sl = slice(lo, lo + chunk)
        pred = np.asarray(_predict(model, model.params, X[sl], None if P is None else P[sl]))
        total += float(np.sum((pred - Y[sl]) ** 2))
    return total / Y.size


def loss_and_grad(model, params, X, Y, P=None) -> tuple[float, dict]:
    """Minibatch MSE and its gradient w.r.t. every (flattened) parameter."""
    flat = flatten(params)
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in flat.items()}
    pred = _predict(model, unflatten(leaves, params), X, P)
    loss = ad.mean(ad.square(ad.sub(pred, Y)))
    grads = tape.backward(loss)
    return float(loss.value), dict(zip(flat, grads))


def check_certified(model) -> None:
    g = model.g if isinstance(model, PLNet) else model
    base = g.base if isinstance(g, ConditionedBiLipModel) else g
    for i, rep in enumerate(base.certify()):
        if not (rep.certified and rep.lemma_ok):
            raise CertificationError(f"monotone layer {i} failed its certificate: {rep.as_dict()}")


def train(model, data: Dataset, cfg: TrainConfig, test: Dataset | None = None, name: str = "", log=None):
    """Fit ``model`` to ``data``; returns ``(trained_model, ExperimentResult)``.

    The input model is left untouched. Shuffling uses a generator seeded from
    ``cfg.seed`` only, so identical inputs give identical losses.
    """
    t0 = time.perf_counter()
    X, P = _split(model, data)
    Y = _targets(model, data.targets)
    Xt = Pt = Yt = None
    if test is not None:
        Xt, Pt = _split(model, test)
        Yt = _targets(model, test.targets)

    init_train = mse(model, X, Y, P)
    init_test = None if test is None else mse(model, Xt, Yt, Pt)
    rng = np.random.default_rng([cfg.seed, 7])
    n = len(X)
    per_epoch = -(-n // cfg.batch_size)
    total = cfg.epochs * per_epoch
    opt = Adam(cfg.betas, cfg.eps)
    params = model.params
    template = params
    flat = {k: np.array(v, dtype=np.float64) for k, v in flatten(params).items()}
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for b in range(per_epoch):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            lr = one_cycle(step, total, cfg.peak_lr, cfg.start_frac, cfg.end_frac)
            try:
                loss, grads = loss_and_grad(model, unflatten(flat, template), X[idx], Y[idx], None if P is None else P[idx])
            except NumericalError as exc:
                raise NumericalError(f"{exc} at epoch {epoch}, step {step} (lr={lr:.3g}); the learning rate is likely too high") from exc
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError(f"non-finite loss or gradient at epoch {epoch}, step {step} (lr={lr:.3g}); the learning rate is likely too high")
            flat = opt.step(flat, grads, lr)
            if not all(np.all(np.isfinite(v)) for v in flat.values()):
                raise NumericalError(f"parameters overflowed at epoch {epoch}, step {step} (lr={lr:.3g}); the learning rate is likely too high")
            losses.append(loss)
            step += 1
        history.append(float(np.mean(losses)))
        model = model.with_params(unflatten(flat, template))
        if cfg.certify_every and ((epoch + 1) % cfg.certify_every == 0 or epoch + 1 == cfg.epochs):
            try:
                check_certified(model)
            except NumericalError as exc:
                raise NumericalError(f"{exc} after epoch {epoch} (lr={lr:.3g}); the learning rate is likely too high") from exc
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} loss {history[-1]:.6g}")

    g = model.g if isinstance(model, PLNet) else model
    result = ExperimentResult(
        experiment=name,
        seed=cfg.seed,
        epochs=cfg.epochs,
        steps=step,
        initial_train_loss=init_train,
        initial_test_loss=init_test,
        train_loss=mse(model, X, Y, P) if cfg.epochs else init_train,
        test_loss=None if test is None else (mse(model, Xt, Yt, Pt) if cfg.epochs else init_test),
        loss_history=history,
        mu=g.mu,
        nu=g.nu,
        tau=g.tau,
        wall_time=time.perf_counter() - t0,
    )
    # the "L2 loss" convention 0.5 * mean squared error, reported alongside
    result.extra["train_l2_loss"] = 0.5 * result.train_loss
    result.extra["test_l2_loss"] = None if result.test_loss is None else 0.5 * result.test_loss
    return model, result
