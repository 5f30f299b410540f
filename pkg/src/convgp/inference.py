"""Estimation schemes for fitting a network to one corrupted signal.

Five schemes are supported:

* ``sgd`` -- plain gradient descent on the masked reconstruction error;
* ``sgd_avg`` -- the same, reporting an exponential sliding-window
  average of the predictions;
* ``sgd_input`` -- gradient descent with the (frozen) input perturbed by
  fresh Gaussian noise at every step;
* ``sgd_input_avg`` -- both of the above;
* ``sgld`` -- Langevin dynamics: the likelihood gradient is scaled by
  the observation-noise variance, the log-prior enters as weight decay,
  and N(0, lr) noise is injected per step; predictions after a burn-in
  phase are accumulated into streaming posterior mean/variance images.

SGD-family schemes use the gradient of the per-element mean squared
error, so learning rates carry the conventional meaning.  The Langevin
update follows

    dw = -(lr/2) (g / sigma_n^2 + lambda w) + N(0, lr),

with ``g`` the gradient of half the summed squared residual; disabling
the injected noise makes an sgld trajectory identical (bitwise) to sgd
with learning rate ``lr / (2 sigma_n^2)`` and weight decay
``lambda sigma_n^2``.

Early stopping is oracle-based: when a clean reference is supplied the
best-so-far prediction is tracked alongside the final iterate.  It is a
diagnostic, not a deployable procedure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network
from .netspec import NetworkSpec
from .network import NetworkInput, ParamSet
from .rng import make_rng
from .signalio import psnr

SCHEMES = ("sgd", "sgd_avg", "sgd_input", "sgd_input_avg", "sgld")
TASKS = ("denoise", "inpaint", "fit1d")

DIVERGENCE_LOSS = 1e6

__all__ = [
    "SCHEMES",
    "TASKS",
    "InferenceConfig",
    "RunTrace",
    "TracePoint",
    "RunResult",
    "PosteriorAccumulator",
    "DivergenceError",
    "sgd_step",
    "sgld_step",
    "ema_update",
    "perturb_input",
    "posterior_stats",
    "default_weight_decay",
    "default_config",
    "run",
]


class DivergenceError(RuntimeError):
    """Raised when the loss exceeds the divergence guard; carries the trace."""

    def __init__(self, message: str, trace: "RunTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class InferenceConfig:
    scheme: str
    lr: float
    iterations: int
    burn_in: int = 0
    sigma_p: float = 0.0
    weight_decay: float = 0.0
    ema_decay: float = 0.99
    noise_sigma: float = 0.1  # likelihood noise scale sigma_n (sgld)
    noise_injection: bool = True  # sgld only; False degenerates to descent
    lr_decay: float = 0.0  # sgld step decay exponent, 0 = constant step
    seed: int = 0
    eval_every: int = 50

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.iterations > 0 and not 0 <= self.burn_in < self.iterations:
            raise ValueError(
                f"burn_in must lie in [0, iterations), got {self.burn_in}"
            )
        if self.iterations == 0 and self.burn_in != 0:
            raise ValueError("burn_in must be 0 when iterations is 0")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must be in (0, 1), got {self.ema_decay}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.sigma_p < 0:
            raise ValueError(f"sigma_p must be >= 0, got {self.sigma_p}")
        if self.noise_sigma <= 0:
            raise ValueError(f"noise_sigma must be positive, got {self.noise_sigma}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme, "lr": self.lr, "iterations": self.iterations,
            "burn_in": self.burn_in, "sigma_p": self.sigma_p,
            "weight_decay": self.weight_decay, "ema_decay": self.ema_decay,
            "noise_sigma": self.noise_sigma, "noise_injection": self.noise_injection,
            "lr_decay": self.lr_decay, "seed": self.seed,
            "eval_every": self.eval_every,
        }


def default_weight_decay(n_pixels: int) -> float:
    """Prior strength scaled inversely with pixel count (5e-8 at 1024^2)."""
    return 5e-8 * (1024.0**2 / float(n_pixels))


def default_config(
    task: str,
    scheme: str,
    n_obs: int,
    noise_sigma: float | None = None,
    seed: int = 0,
    **overrides,
) -> InferenceConfig:
    """Task defaults: paper-style learning rates, desk-scale iteration counts.

    ``n_obs`` is the number of observed elements (channels times observed
    pixels); the sgld step size is matched to the sgd default so both
    families move at comparable speed.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    base_lr = {"denoise": 0.01, "inpaint": 0.001, "fit1d": 0.01}[task]
    iterations = {"denoise": 5000, "inpaint": 7500, "fit1d": 3000}[task]
    burn_in = {"denoise": 1750, "inpaint": 5000, "fit1d": 1000}[task]
    sigma_n = noise_sigma if noise_sigma is not None else 0.1
    cfg = dict(
        scheme=scheme,
        lr=base_lr,
        iterations=iterations,
        burn_in=0,
        sigma_p=0.0,
        weight_decay=0.0,
        noise_sigma=sigma_n,
        seed=seed,
    )
    if scheme in ("sgd_input", "sgd_input_avg"):
        cfg["sigma_p"] = 1.0 / 30.0
    if scheme == "sgld":
        cfg["lr"] = 4.0 * sigma_n**2 * base_lr / float(n_obs)
        cfg["burn_in"] = burn_in
        cfg["weight_decay"] = default_weight_decay(n_obs)
    cfg.update(overrides)
    return InferenceConfig(**cfg)


# -- update rules --------------------------------------------------------


def _check_grads_finite(grads: dict[int, np.ndarray]) -> None:
    for i, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(
                f"non-finite gradient in layer {i}", RunTrace([])
            )


def _descend(
    params: ParamSet, grads: dict[int, np.ndarray], lr: float, weight_decay: float
) -> ParamSet:
    new = {}
    for i, w in params.weights.items():
        g = grads[i]
        if weight_decay != 0.0:
            new[i] = w - lr * (g + weight_decay * w)
        else:
            new[i] = w - lr * g
    return ParamSet(new, params.seed)


def sgd_step(
    params: ParamSet, grads: dict[int, np.ndarray], lr: float, weight_decay: float = 0.0
) -> ParamSet:
    """w <- w - lr (g + weight_decay w)."""
    _check_grads_finite(grads)
    return _descend(params, grads, lr, weight_decay)


def sgld_step(
    params: ParamSet,
    grads: dict[int, np.ndarray],
    lr: float,
    weight_decay: float,
    noise_sigma: float,
    rng: np.random.Generator,
    inject: bool = True,
) -> ParamSet:
    """Langevin update; ``grads`` is the gradient of half the summed
    squared residual, scaled inside by the likelihood noise variance."""
    _check_grads_finite(grads)
    lr_eff = 0.5 * lr / noise_sigma**2
    wd_eff = weight_decay * noise_sigma**2
    new = _descend(params, grads, lr_eff, wd_eff)
    if inject:
        std = np.sqrt(lr)
        for i in new.keys():
            arr = new.weights[i]
            new.weights[i] = arr + std * rng.standard_normal(arr.shape)
    return new


def ema_update(acc: np.ndarray | None, new: np.ndarray, decay: float) -> np.ndarray:
    """acc' = decay acc + (1 - decay) new; the first call adopts ``new``."""
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must be in (0, 1), got {decay}")
    if acc is None:
        return np.array(new, dtype=np.float64, copy=True)
    if acc.shape != new.shape:
        raise ValueError(f"shape mismatch: {acc.shape} vs {new.shape}")
    return decay * acc + (1.0 - decay) * new


def perturb_input(net_input: NetworkInput, rng: np.random.Generator) -> np.ndarray:
    """Return x plus fresh N(0, sigma_p^2) noise; the stored x is untouched."""
    if net_input.perturb_sigma == 0.0:
        return net_input.x
    return net_input.x + net_input.perturb_sigma * rng.standard_normal(
        net_input.x.shape
    )


class PosteriorAccumulator:
    """Streaming per-pixel mean and variance of accumulated samples."""

    def __init__(self):
        self.count = 0
        self._mean: np.ndarray | None = None
        self._m2: np.ndarray | None = None

    def update(self, sample: np.ndarray) -> None:
        sample = np.asarray(sample, dtype=np.float64)
        self.count += 1
        if self._mean is None:
            self._mean = sample.copy()
            self._m2 = np.zeros_like(sample)
            return
        delta = sample - self._mean
        self._mean += delta / self.count
        self._m2 += delta * (sample - self._mean)

    @property
    def mean(self) -> np.ndarray:
        if self._mean is None:
            raise ValueError("no samples accumulated")
        return self._mean

    def variance(self) -> np.ndarray:
        if self.count < 2:
            raise ValueError(f"variance needs >= 2 samples, have {self.count}")
        return self._m2 / (self.count - 1)


def posterior_stats(acc: PosteriorAccumulator) -> dict[str, np.ndarray]:
    """Unbiased mean/variance images of the accumulated samples."""
    return {"mean": acc.mean.copy(), "variance": acc.variance()}


# -- the run loop --------------------------------------------------------


@dataclass
class TracePoint:
    iteration: int
    mse_noisy: float
    psnr_clean: float | None = None
    param_norm: float = 0.0
    posterior_psnr: float | None = None


@dataclass
class RunTrace:
    points: list[TracePoint] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points], dtype=np.float64)

    def best_point(self) -> TracePoint:
        scored = [p for p in self.points if p.psnr_clean is not None]
        if not scored:
            raise ValueError("trace has no clean-reference PSNR entries")
        return max(scored, key=lambda p: p.psnr_clean)

    def csv_rows(self) -> list[str]:
        rows = ["iter,mse_noisy,psnr_clean,param_norm,posterior_psnr"]
        for p in self.points:
            pc = "" if p.psnr_clean is None else f"{p.psnr_clean:.6f}"
            pp = "" if p.posterior_psnr is None else f"{p.posterior_psnr:.6f}"
            rows.append(
                f"{p.iteration},{p.mse_noisy:.10g},{pc},{p.param_norm:.6g},{pp}"
            )
        return rows


@dataclass
class BestSnapshot:
    iteration: int
    psnr: float
    image: np.ndarray


@dataclass
class RunResult:
    output: np.ndarray
    trace: RunTrace
    posterior_mean: np.ndarray | None = None
    posterior_variance: np.ndarray | None = None
    best: BestSnapshot | None = None
    best_ema: BestSnapshot | None = None
    config: InferenceConfig | None = None

    def oracle_psnr(self) -> float | None:
        """PSNR of the scheme's reported estimate under oracle stopping.

        Averaging schemes report their best sliding-window average, plain
        descent schemes their best prediction, and sgld its posterior-mean
        final output (no stopping needed).
        """
        if self.config is not None and self.config.scheme == "sgld":
            return self.trace.points[-1].posterior_psnr
        if self.best_ema is not None:
            return self.best_ema.psnr
        if self.best is not None:
            return self.best.psnr
        return None


def _masked_mse(out, target, mask_b, n_obs) -> float:
    diff = (out - target) * mask_b
    return float(np.sum(diff * diff) / n_obs)


def run(
    task: str,
    target: np.ndarray,
    spec: NetworkSpec,
    config: InferenceConfig,
    mask: np.ndarray | None = None,
    clean_ref: np.ndarray | None = None,
    padding: str = "reflect",
) -> RunResult:
    """Execute one (task, scheme) fit and return estimate plus diagnostics.

    ``target`` is a (channels, *spatial) tensor; ``mask`` a boolean array
    over the spatial grid (True = observed).  Inpainting uses the masked
    loss, so gradients never see dropped pixels.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    target = np.asarray(target, dtype=np.float64)
    shape = target.shape[1:]
    if task == "inpaint" and mask is None:
        raise ValueError("inpainting requires a mask")
    if mask is None:
        mask_b = np.ones(target.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != shape:
            raise ValueError(f"mask shape {mask.shape} does not match target {shape}")
        mask_b = np.broadcast_to(mask[None], target.shape)
    n_obs = int(mask_b.sum())
    if n_obs == 0:
        raise ValueError("mask leaves no observed pixels")
    if clean_ref is not None:
        clean_ref = np.asarray(clean_ref, dtype=np.float64)
        if clean_ref.shape != target.shape:
            raise ValueError("clean reference shape does not match target")

    params, net_input = network.init_from_rng(
        spec, make_rng(config.seed, 0), shape
    )
    net_input.perturb_sigma = config.sigma_p
    rng_perturb = make_rng(config.seed, 1)
    rng_langevin = make_rng(config.seed, 2)

    is_sgld = config.scheme == "sgld"
    use_ema = config.scheme in ("sgd_avg", "sgd_input_avg")
    grad_scale = 1.0 if is_sgld else 2.0 / n_obs

    trace = RunTrace()
    acc = PosteriorAccumulator() if is_sgld else None
    ema: np.ndarray | None = None
    best: BestSnapshot | None = None
    best_ema: BestSnapshot | None = None

    def record(iteration: int, out: np.ndarray) -> None:
        nonlocal best, best_ema
        mse = _masked_mse(out, target, mask_b, n_obs)
        if not np.isfinite(mse) or mse > DIVERGENCE_LOSS:
            raise DivergenceError(
                f"loss {mse:g} exceeded the divergence guard at iteration {iteration}",
                trace,
            )
        pc = None
        pp = None
        if clean_ref is not None:
            pc = psnr(out, clean_ref)
            if best is None or pc > best.psnr:
                best = BestSnapshot(iteration, pc, out.copy())
            if ema is not None:
                pe = psnr(ema, clean_ref)
                if best_ema is None or pe > best_ema.psnr:
                    best_ema = BestSnapshot(iteration, pe, ema.copy())
        if acc is not None and acc.count >= 1 and clean_ref is not None:
            pp = psnr(acc.mean, clean_ref)
        trace.points.append(
            TracePoint(iteration, mse, pc, params.norm(), pp)
        )

    out = None
    for i in range(config.iterations):
        x_t = perturb_input(net_input, rng_perturb)
        out, cache = network.forward_cached(spec, params, x_t, padding)
        if i % config.eval_every == 0:
            record(i, out)
        residual_grad = grad_scale * ((out - target) * mask_b)
        grads, _ = network.backward(spec, params, cache, residual_grad, padding)
        if is_sgld:
            lr_t = config.lr
            if config.lr_decay > 0:
                lr_t = config.lr * (1.0 + i) ** (-config.lr_decay)
            params = sgld_step(
                params, grads, lr_t, config.weight_decay, config.noise_sigma,
                rng_langevin, inject=config.noise_injection,
            )
        else:
            params = sgd_step(params, grads, config.lr, config.weight_decay)
        if use_ema:
            ema = ema_update(ema, out, config.ema_decay)
        if acc is not None and i >= config.burn_in:
            acc.update(out)

    final_out = network.forward(spec, params, net_input.x, padding)
    record(config.iterations, final_out)

    posterior_mean = posterior_var = None
    if acc is not None and acc.count >= 2:
        stats = posterior_stats(acc)
        posterior_mean, posterior_var = stats["mean"], stats["variance"]

    if is_sgld and posterior_mean is not None:
        output = posterior_mean
    elif use_ema and ema is not None:
        output = ema
    else:
        output = final_out
    return RunResult(
        output=output,
        trace=trace,
        posterior_mean=posterior_mean,
        posterior_variance=posterior_var,
        best=best,
        best_ema=best_ema,
        config=config,
    )
