"""Command-line driver.

Subcommands:

* ``kernel derive``   -- compile an architecture into its stationary kernel
* ``kernel validate`` -- Monte Carlo check of the analytic kernel
* ``gp sample|infer|fit-rbf`` -- exact GP operations
* ``dip run``         -- one (task, scheme) reconstruction run
* ``experiment ...``  -- multi-run suites (toy1d, sweep-channels,
                          denoise-suite, inpaint-suite)

Every command writes a manifest JSON recording config, seeds, versions
and file hashes; re-running a command with the same inputs reproduces
its outputs byte for byte.  Exit codes: 0 success, 1 numerical failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import calculus, empirics, gp, inference, network, presets, signalio
from .manifest import RunManifest
from .netspec import NetworkSpec, load_spec
from .rng import make_rng
from .stationary import StationaryKernel, load_kernel, save_kernel
from .synth import synthetic_image


# -- shared helpers --------------------------------------------------------


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("architecture")
    g.add_argument("--preset", help="conv_<d>, ae_<d>, unet_small or dip_paper_scaled")
    g.add_argument("--spec", help="network spec JSON file")
    g.add_argument("--channels", type=int, default=64)
    g.add_argument("--in-channels", type=int, default=None)
    g.add_argument("--width", type=int, default=3)
    g.add_argument("--out-channels", type=int, default=None)
    g.add_argument("--input", default="white",
                   choices=("white", "gaussian_filtered"), dest="input_kind")
    g.add_argument("--input-sigma", type=float, default=1.0)
    g.add_argument("--filter-std", type=float, default=0.0)
    g.add_argument("--white-std", type=float, default=0.0,
                   help="white component added to a gaussian_filtered input")


def _resolve_spec(args, parser, out_channels=None) -> NetworkSpec:
    if bool(args.spec) == bool(args.preset):
        parser.error("exactly one of --spec or --preset is required")
    if args.spec:
        return load_spec(args.spec)
    try:
        return presets.preset(
            args.preset,
            channels=args.channels,
            width=args.width,
            in_channels=args.in_channels,
            input_kind=args.input_kind,
            input_sigma=args.input_sigma,
            filter_std=args.filter_std,
            white_std=args.white_std,
            out_channels=out_channels if out_channels is not None else args.out_channels,
        )
    except ValueError as e:
        parser.error(str(e))


def _manifest(args, config: dict) -> RunManifest:
    return RunManifest(
        command=sys.argv[1:],
        config=config,
        master_seed=getattr(args, "seed", None),
    )


def _write_rho_csv(path, kernel: StationaryKernel, estimate=None) -> None:
    if kernel.dims != 1:
        raise ValueError("rho CSV export is for 1D kernels")
    with open(path, "w") as f:
        if estimate is None:
            f.write("lag,rho\n")
            for lag, r in zip(kernel.lags, kernel.rho()):
                f.write(f"{lag},{r:.10g}\n")
        else:
            f.write("lag,rho,rho_hat,stderr\n")
            limit = min(kernel.half_width, estimate.half_width)
            rho = kernel.rho()
            rho_e = estimate.rho()
            se = estimate.stderr / estimate.variance
            for r in range(-limit, limit + 1):
                f.write(
                    f"{r},{rho[kernel.half_width + r]:.10g},"
                    f"{rho_e[estimate.half_width + r]:.10g},"
                    f"{se[estimate.half_width + r]:.3g}\n"
                )


def _load_image_tensor(path):
    img = signalio.read_image(path)
    return img.to_tensor(), img


def _save_tensor_image(path, tensor, maxval=255):
    signalio.write_image(path, signalio.ImageBuffer.from_tensor(tensor), maxval=maxval)


# -- kernel ----------------------------------------------------------------


def cmd_kernel_derive(args, parser) -> int:
    spec = _resolve_spec(args, parser)
    man = _manifest(args, {"dims": args.dims, "half_width": args.half_width,
                           "spec": spec.to_json_dict()})
    if args.spec:
        man.add_input(args.spec)
    kernel, trace = calculus.derive_kernel(
        spec, dims=args.dims, half_width=args.half_width, with_trace=True
    )
    save_kernel(kernel, args.out)
    man.add_output(args.out)
    if args.trace:
        doc = kernel.to_json_dict()
        doc["trace"] = [
            {
                "layer": t.index,
                "label": t.label,
                "variance": t.kernel.variance,
                "half_width": t.kernel.half_width,
                "approximate": t.approximate,
            }
            for t in trace
        ]
        with open(args.trace, "w") as f:
            json.dump(doc, f, indent=2)
        man.add_output(args.trace)
    if args.csv:
        _write_rho_csv(args.csv, kernel)
        man.add_output(args.csv)
    man.write(str(args.out) + ".manifest.json")
    print(f"derived kernel: dims={kernel.dims} L={kernel.half_width} "
          f"K(0)={kernel.variance:.6g} -> {args.out}")
    return 0


def cmd_kernel_validate(args, parser) -> int:
    spec = _resolve_spec(args, parser)
    man = _manifest(args, {"samples": args.samples, "length": args.length,
                           "half_width": args.half_width, "max_lag": args.max_lag,
                           "spec": spec.to_json_dict()})
    if args.spec:
        man.add_input(args.spec)
    kernel = calculus.derive_kernel(spec, dims=1, half_width=args.half_width)
    est = empirics.estimate_covariance(
        spec, args.samples, args.length, make_rng(args.seed), half_width=args.half_width
    )
    max_lag = min(args.max_lag, kernel.half_width, est.half_width)
    report = empirics.compare(kernel, est, max_lag=max_lag)
    doc = report.to_json_dict()
    doc["samples"] = args.samples
    doc["length"] = args.length
    with open(args.report, "w") as f:
        json.dump(doc, f, indent=2)
    man.add_output(args.report)
    if args.csv:
        _write_rho_csv(args.csv, kernel, est)
        man.add_output(args.csv)
    man.write(str(args.report) + ".manifest.json")
    print(f"max |rho_hat - rho| over |r|<={report.max_lag_checked}: "
          f"{report.max_abs_rho_err:.4f}")
    if args.max_err is not None and report.max_abs_rho_err > args.max_err:
        print(f"exceeds --max-err {args.max_err}", file=sys.stderr)
        return 1
    return 0


# -- gp ---------------------------------------------------------------------


def _grid_points(kernel: StationaryKernel, shape):
    if kernel.dims == 1:
        return np.arange(shape[0])
    hh, ww = shape
    yy, xx = np.meshgrid(np.arange(hh), np.arange(ww), indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


def cmd_gp_sample(args, parser) -> int:
    kernel = load_kernel(args.kernel)
    man = _manifest(args, {"n": args.n, "size": args.size})
    man.add_input(args.kernel)
    if kernel.dims == 1:
        shape = (int(args.size),)
    else:
        hh, _, ww = args.size.partition("x")
        shape = (int(hh), int(ww or hh))
    pts = _grid_points(kernel, shape)
    draws = gp.sample_prior(kernel, pts, make_rng(args.seed), n=args.n)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, draw in enumerate(draws):
        if kernel.dims == 1:
            path = outdir / f"sample_{i:03d}.csv"
            signalio.write_signal(path, np.arange(shape[0]), draw)
        else:
            img = draw.reshape(shape)
            # affine map to [0,1] for viewing
            lo, hi = img.min(), img.max()
            view = (img - lo) / (hi - lo) if hi > lo else img * 0.0
            path = outdir / f"sample_{i:03d}.pgm"
            signalio.write_image(path, signalio.ImageBuffer(view))
        man.add_output(path)
    man.write(outdir / "manifest.json")
    print(f"wrote {args.n} prior samples to {outdir}")
    return 0


def cmd_gp_infer(args, parser) -> int:
    kernel = load_kernel(args.kernel)
    noise = gp.NoiseModel(args.noise)
    man = _manifest(args, {"noise": args.noise})
    man.add_input(args.kernel)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.obs:
        man.add_input(args.obs)
        pos, val, obs = signalio.read_signal(args.obs)
        pos = pos.astype(np.int64)
        obs_pts, obs_val = pos[obs], val[obs]
        query = pos if args.query is None else np.arange(*_parse_range(args.query))
        centre = float(np.mean(obs_val))
        post = gp.posterior(kernel, obs_pts, obs_val - centre, noise, query)
        out_csv = outdir / "posterior.csv"
        with open(out_csv, "w") as f:
            f.write("index,mean,variance\n")
            for q, m, v in zip(query, post.mean + centre, post.variance):
                f.write(f"{q},{m:.10g},{v:.10g}\n")
        man.add_output(out_csv)
        print(f"posterior over {len(query)} points -> {out_csv}")
    else:
        if not args.image or not args.mask:
            parser.error("gp infer needs --obs, or --image with --mask")
        man.add_input(args.image)
        man.add_input(args.mask)
        tensor, img = _load_image_tensor(args.image)
        if img.channels != 1:
            parser.error("gp infer expects a grayscale image")
        mask_img = signalio.read_image(args.mask)
        observed = mask_img.pixels[:, :, 0] > 0.5
        values = tensor[0]
        if kernel.dims != 2:
            parser.error("a 2D kernel is required for image inference")
        post_img, var_img = gp_inpaint(kernel, values, observed, noise)
        out_mean = outdir / "posterior_mean.pgm"
        out_var = outdir / "posterior_variance.pgm"
        _save_tensor_image(out_mean, post_img[None])
        vmax = var_img.max()
        _save_tensor_image(out_var, (var_img / vmax if vmax > 0 else var_img)[None])
        man.add_output(out_mean)
        man.add_output(out_var)
        out_csv = outdir / "posterior.csv"
        hh, ww = values.shape
        with open(out_csv, "w") as f:
            f.write("y,x,mean,variance\n")
            for iy in range(hh):
                for ix in range(ww):
                    f.write(f"{iy},{ix},{post_img[iy, ix]:.10g},{var_img[iy, ix]:.10g}\n")
        man.add_output(out_csv)
        msg = f"posterior images -> {outdir}"
        if args.clean:
            man.add_input(args.clean)
            clean, _ = _load_image_tensor(args.clean)
            val = signalio.psnr(post_img, clean[0])
            msg += f" (PSNR vs clean: {val:.2f} dB)"
        print(msg)
    man.write(outdir / "manifest.json")
    return 0


def gp_inpaint(kernel, values, observed, noise):
    """Posterior mean/variance images for observed-pixel conditioning."""
    hh, ww = values.shape
    pts = _grid_points(kernel, (hh, ww))
    obs_flat = observed.ravel()
    obs_pts = pts[obs_flat]
    obs_val = values.ravel()[obs_flat]
    centre = float(np.mean(obs_val))
    post = gp.posterior(kernel, obs_pts, obs_val - centre, noise, pts)
    mean = (post.mean + centre).reshape(hh, ww)
    var = post.variance.reshape(hh, ww)
    return mean, var


def _parse_range(spec: str):
    parts = [int(p) for p in spec.split(":")]
    if len(parts) == 1:
        return (0, parts[0])
    return tuple(parts)


def cmd_gp_fit_rbf(args, parser) -> int:
    pos, val, obs = signalio.read_signal(args.obs)
    grid = [float(x) for x in args.grid.split(",")] if "," in args.grid else None
    if grid is None:
        lo, _, hi = args.grid.partition(":")
        grid = list(np.arange(float(lo), float(hi) + 1))
    noise = gp.NoiseModel(args.noise)
    kern = gp.fit_rbf(pos[obs], val[obs], noise, grid)
    lml = gp.log_marginal_likelihood(kern, pos[obs], val[obs] - np.mean(val[obs]), noise)
    print(f"lengthscale {kern.lengthscale:g}  variance {kern.variance:.6g}  "
          f"log_marginal_likelihood {lml:.6g}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"lengthscale": kern.lengthscale, "variance": kern.variance,
                       "log_marginal_likelihood": lml}, f, indent=2)
    return 0


# -- dip ---------------------------------------------------------------------


def _merge_config(task, scheme, n_obs, noise_sigma, args) -> inference.InferenceConfig:
    overrides = {}
    if args.config:
        with open(args.config) as f:
            overrides.update(json.load(f))
    for name in ("lr", "iterations", "burn_in", "sigma_p", "weight_decay",
                 "ema_decay", "eval_every"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    return inference.default_config(
        task, scheme, n_obs, noise_sigma=noise_sigma, seed=args.seed, **overrides
    )


def cmd_dip_run(args, parser) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    clean = None
    mask = None
    if args.task == "fit1d":
        if not args.signal:
            parser.error("--signal is required for task fit1d")
        pos, val, obs = signalio.read_signal(args.signal)
        target = val[None]
        mask = obs
        shape_desc = f"T={len(val)}"
    else:
        if not args.image:
            parser.error("--image is required for denoise/inpaint")
        target, img = _load_image_tensor(args.image)
        if args.mask:
            mask_img = signalio.read_image(args.mask)
            mask = mask_img.pixels[:, :, 0] > 0.5
        if args.clean:
            clean, _ = _load_image_tensor(args.clean)
        shape_desc = f"{img.height}x{img.width}x{img.channels}"
    spec = _resolve_spec(args, parser, out_channels=target.shape[0])
    n_obs = int(np.broadcast_to(mask, target.shape).sum()) if mask is not None else target.size
    config = _merge_config(args.task, args.scheme, n_obs, args.noise_sigma, args)
    man = _manifest(args, {"task": args.task, "scheme": args.scheme,
                           "shape": shape_desc, "spec": spec.to_json_dict(),
                           "inference": config.to_json_dict()})
    for p in (args.image, args.clean, args.mask, args.signal, args.spec, args.config):
        if p:
            man.add_input(p)

    result = inference.run(args.task, target, spec, config, mask=mask,
                           clean_ref=clean, padding=args.padding)

    if args.task == "fit1d":
        est_path = outdir / "estimate.csv"
        signalio.write_signal(est_path, np.arange(target.shape[1]), result.output[0])
        man.add_output(est_path)
        if result.posterior_variance is not None:
            var_path = outdir / "posterior_variance.csv"
            signalio.write_signal(var_path, np.arange(target.shape[1]),
                                  result.posterior_variance[0])
            man.add_output(var_path)
    else:
        est_path = outdir / "estimate.pgm" if target.shape[0] == 1 else outdir / "estimate.ppm"
        _save_tensor_image(est_path, result.output)
        man.add_output(est_path)
        if result.posterior_variance is not None:
            var = result.posterior_variance.mean(axis=0)
            vmax = var.max()
            var_path = outdir / "variance.pgm"
            _save_tensor_image(var_path, (var / vmax if vmax > 0 else var)[None])
            man.add_output(var_path)
    trace_path = outdir / "trace.csv"
    with open(trace_path, "w") as f:
        f.write("\n".join(result.trace.csv_rows()) + "\n")
    man.add_output(trace_path)
    if result.best is not None:
        best_doc = {"iteration": result.best.iteration, "psnr": result.best.psnr}
        with open(outdir / "best.json", "w") as f:
            json.dump(best_doc, f, indent=2)
        man.add_output(outdir / "best.json")
    man.write(outdir / "manifest.json")
    last = result.trace.points[-1]
    msg = f"{args.scheme} {args.task}: final mse_noisy {last.mse_noisy:.5g}"
    if last.psnr_clean is not None:
        msg += f", final psnr {last.psnr_clean:.2f} dB"
    if result.best is not None:
        msg += f", best psnr {result.best.psnr:.2f} dB @ iter {result.best.iteration}"
    print(msg)
    return 0


# -- experiments -------------------------------------------------------------


def _suite_one(job):
    """One (image, scheme, seed) run; module-level for process pools."""
    task, target, clean, mask, spec_json, scheme, seed, overrides, noise_sigma = job
    spec = NetworkSpec.from_json_dict(spec_json)
    n_obs = int(np.broadcast_to(mask, target.shape).sum()) if mask is not None else target.size
    config = inference.default_config(
        task, scheme, n_obs, noise_sigma=noise_sigma, seed=seed, **overrides
    )
    result = inference.run(task, target, spec, config, mask=mask, clean_ref=clean)
    final = result.trace.points[-1]
    best = result.best
    output_psnr = signalio.psnr(result.output, clean) if clean is not None else None
    report = result.oracle_psnr()
    return {
        "scheme": scheme,
        "seed": seed,
        "final_psnr": final.psnr_clean,
        "best_psnr": None if best is None else best.psnr,
        "output_psnr": output_psnr,
        # table entry: oracle-stopped estimate for descent schemes, the
        # posterior mean for sgld
        "report_psnr": output_psnr if report is None else report,
        "final_mse_noisy": final.mse_noisy,
    }


def _run_suite(jobs, workers: int):
    if workers <= 1:
        return [_suite_one(j) for j in jobs]
    import concurrent.futures as cf

    try:
        from threadpoolctl import threadpool_limits

        def _init():
            threadpool_limits(1)
    except ImportError:  # pragma: no cover
        _init = None
    with cf.ProcessPoolExecutor(max_workers=workers, initializer=_init) as ex:
        return list(ex.map(_suite_one, jobs))


def _suite_common(args, parser, task: str) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    schemes = args.schemes.split(",")
    for s in schemes:
        if s not in inference.SCHEMES:
            parser.error(f"unknown scheme {s!r}")
    man = _manifest(args, {"task": task, "schemes": schemes, "seeds": args.seeds,
                           "images": args.images})
    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.burn_in is not None:
        overrides["burn_in"] = args.burn_in
    if args.lr is not None:
        overrides["lr"] = args.lr

    sigma = args.sigma / 255.0 if args.sigma_scale == "255" else args.sigma
    jobs = []
    image_names = []
    for path in args.images:
        man.add_input(path)
        tensor, img = _load_image_tensor(path)
        name = Path(path).stem
        image_names.append(name)
        rng = make_rng(args.seed, stream=zlib.crc32(name.encode()) % (2**31))
        if task == "denoise":
            noisy = tensor + sigma * rng.standard_normal(tensor.shape)
            mask = None
            noise_sigma = sigma
        else:
            noisy = tensor
            mask = signalio.random_mask(tensor.shape[1:], args.drop, rng).observed
            noise_sigma = 1e-2
        spec = _resolve_spec(args, parser, out_channels=tensor.shape[0])
        for scheme in schemes:
            for s in range(args.seeds):
                jobs.append((task, noisy, tensor, mask, spec.to_json_dict(),
                             scheme, args.seed + 1000 * s + 17, overrides, noise_sigma))
    results = _run_suite(jobs, args.workers)

    # group: rows keyed by (image, scheme)
    per_image = {}
    idx = 0
    for name in image_names:
        for scheme in schemes:
            vals = []
            for _ in range(args.seeds):
                r = results[idx]
                idx += 1
                vals.append(r["report_psnr"])
            per_image[(name, scheme)] = (float(np.mean(vals)), float(np.std(vals)))
    table_path = outdir / f"{task}_table.csv"
    with open(table_path, "w") as f:
        f.write("image,scheme,mean_psnr,std_psnr,seeds\n")
        for (name, scheme), (m, s) in per_image.items():
            f.write(f"{name},{scheme},{m:.4f},{s:.4f},{args.seeds}\n")
    man.add_output(table_path)
    raw_path = outdir / f"{task}_runs.json"
    with open(raw_path, "w") as f:
        json.dump(results, f, indent=2)
    man.add_output(raw_path)
    man.write(outdir / "manifest.json")
    print(f"{len(jobs)} runs -> {table_path}")
    for (name, scheme), (m, s) in per_image.items():
        print(f"  {name:>12} {scheme:>14}: {m:.2f} +- {s:.2f} dB")
    return 0


def cmd_experiment_denoise_suite(args, parser) -> int:
    return _suite_common(args, parser, "denoise")


def cmd_experiment_inpaint_suite(args, parser) -> int:
    return _suite_common(args, parser, "inpaint")


def cmd_experiment_sweep_channels(args, parser) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    channels = [int(c) for c in args.channels.split(",")]
    man = _manifest(args, {"channels": channels, "seeds": args.seeds,
                           "drop": args.drop})
    if args.image:
        man.add_input(args.image)
        tensor, _ = _load_image_tensor(args.image)
    else:
        tensor = synthetic_image("blobs", args.size)[None]
    rng = make_rng(args.seed, stream=7)
    mask = signalio.random_mask(tensor.shape[1:], args.drop, rng).observed
    rows = []

    # GP with the derived limiting kernel of the same architecture; the
    # lag grid must cover every pixel pair and survive the down/up chain
    # intact, hence the round-up to a multiple of 4
    half = -4 * (-(max(tensor.shape[1], tensor.shape[2]) - 1) // 4)
    spec0 = presets.preset("unet_small", channels=channels[0],
                           in_channels=channels[0], out_channels=1)
    kernel = calculus.derive_kernel(spec0, dims=2, half_width=max(half, 2))
    mean_img, _ = gp_inpaint(kernel, tensor[0], mask, gp.NoiseModel(args.noise))
    gp_psnr = signalio.psnr(mean_img, tensor[0], None)
    rows.append(("gp", 0, gp_psnr))

    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    jobs = []
    for ch in channels:
        spec = presets.preset("unet_small", channels=ch, in_channels=ch, out_channels=1)
        for s in range(args.seeds):
            jobs.append(("inpaint", tensor, tensor, mask, spec.to_json_dict(),
                         args.scheme, args.seed + 1000 * s + 31, overrides, 1e-2))
    results = _run_suite(jobs, args.workers)
    idx = 0
    for ch in channels:
        vals = []
        for _ in range(args.seeds):
            r = results[idx]
            idx += 1
            vals.append(r["best_psnr"] if args.scheme != "sgld" and r["best_psnr"]
                        else r["output_psnr"])
        rows.append(("dip", ch, float(np.median(vals))))
    csv_path = outdir / "sweep_channels.csv"
    with open(csv_path, "w") as f:
        f.write("kind,channels,psnr\n")
        for kind, ch, val in rows:
            f.write(f"{kind},{ch},{val:.4f}\n")
    man.add_output(csv_path)
    man.write(outdir / "manifest.json")
    for kind, ch, val in rows:
        print(f"  {kind:>4} ch={ch:<4} psnr {val:.2f} dB")
    return 0


def cmd_experiment_toy1d(args, parser) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    man = _manifest(args, {"depths": args.depths, "length": args.length,
                           "samples": args.samples})
    depths = [int(d) for d in args.depths.split(",")]
    stds = [float(s) for s in args.filter_stds.split(",")]
    half = 24
    for arch in ("conv", "ae"):
        for depth in depths:
            for fs in stds:
                kind = "white" if fs == 0 else "gaussian_filtered"
                spec = presets.preset(
                    f"{arch}_{depth}", channels=args.channels,
                    in_channels=args.channels, input_kind=kind,
                    filter_std=fs or 0.0,
                )
                label = f"{arch}{depth}_std{fs:g}"
                kernel = calculus.derive_kernel(spec, dims=1, half_width=half)
                est = empirics.estimate_covariance(
                    spec, args.samples, args.length, make_rng(args.seed),
                    half_width=min(half, kernel.half_width),
                )
                path = outdir / f"cov_{label}.csv"
                _write_rho_csv(path, kernel, est)
                man.add_output(path)
    # prior samples and a 90%-dropped posterior fit for the deepest conv net
    spec = presets.preset(f"conv_{depths[-1]}", channels=args.channels,
                          in_channels=args.channels)
    pts = np.arange(args.length // 4)
    kernel = calculus.derive_kernel(spec, dims=1, half_width=len(pts))
    draws = gp.sample_prior(kernel, pts, make_rng(args.seed, 3), n=3)
    for i, d in enumerate(draws):
        p = outdir / f"prior_sample_{i}.csv"
        signalio.write_signal(p, pts, d)
        man.add_output(p)
    truth = gp.sample_prior(kernel, pts, make_rng(args.seed, 4), n=1)[0]
    mask = signalio.random_mask((len(pts),), 0.9, make_rng(args.seed, 5)).observed
    post = gp.posterior(kernel, pts[mask], truth[mask], gp.NoiseModel(0.05), pts)
    p = outdir / "gp_posterior.csv"
    with open(p, "w") as f:
        f.write("index,mean,variance\n")
        for q, m, v in zip(pts, post.mean, post.variance):
            f.write(f"{q},{m:.10g},{v:.10g}\n")
    man.add_output(p)
    truth_path = outdir / "signal.csv"
    signalio.write_signal(truth_path, pts, truth, mask)
    man.add_output(truth_path)
    spec_fit = presets.preset(f"conv_{depths[-1]}", channels=args.channels,
                              in_channels=args.channels, out_channels=1)
    n_obs = int(mask.sum())
    config = inference.default_config(
        "fit1d", "sgld", n_obs, noise_sigma=0.05, seed=args.seed,
        iterations=args.iterations, burn_in=args.iterations // 3,
    )
    result = inference.run("fit1d", truth[None], spec_fit, config, mask=mask,
                           padding="circular")
    p = outdir / "sgld_posterior_mean.csv"
    signalio.write_signal(p, pts, result.output[0])
    man.add_output(p)
    if result.posterior_variance is not None:
        p = outdir / "sgld_posterior_variance.csv"
        signalio.write_signal(p, pts, result.posterior_variance[0])
        man.add_output(p)
    man.write(outdir / "manifest.json")
    print(f"toy 1D artifacts -> {outdir}")
    return 0


# -- parser wiring -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convgp", description=__doc__)
    top = parser.add_subparsers(dest="group", required=True)

    pk = top.add_parser("kernel", help="stationary kernel derivation/validation")
    pk_sub = pk.add_subparsers(dest="cmd", required=True)

    pkd = pk_sub.add_parser("derive", help="compile a spec into its kernel")
    _add_spec_args(pkd)
    pkd.add_argument("--dims", type=int, default=1, choices=(1, 2))
    pkd.add_argument("--half-width", type=int, default=64)
    pkd.add_argument("--out", required=True)
    pkd.add_argument("--trace", help="write per-layer trace JSON here")
    pkd.add_argument("--csv", help="write a lag,rho CSV here (1D)")
    pkd.set_defaults(func=cmd_kernel_derive)

    pkv = pk_sub.add_parser("validate", help="Monte Carlo kernel validation")
    _add_spec_args(pkv)
    pkv.add_argument("--samples", type=int, default=500)
    pkv.add_argument("--length", type=int, default=512)
    pkv.add_argument("--half-width", type=int, default=32)
    pkv.add_argument("--max-lag", type=int, default=20)
    pkv.add_argument("--max-err", type=float, default=None,
                     help="exit 1 if the max rho error exceeds this")
    pkv.add_argument("--seed", type=int, default=0)
    pkv.add_argument("--report", required=True)
    pkv.add_argument("--csv", help="also write lag,rho,rho_hat,stderr CSV")
    pkv.set_defaults(func=cmd_kernel_validate)

    pg = top.add_parser("gp", help="exact GP sampling and inference")
    pg_sub = pg.add_subparsers(dest="cmd", required=True)

    pgs = pg_sub.add_parser("sample", help="draw prior samples")
    pgs.add_argument("--kernel", required=True)
    pgs.add_argument("--size", required=True, help="T for 1D, HxW for 2D")
    pgs.add_argument("--n", type=int, default=1)
    pgs.add_argument("--seed", type=int, default=0)
    pgs.add_argument("--out", required=True)
    pgs.set_defaults(func=cmd_gp_sample)

    pgi = pg_sub.add_parser("infer", help="posterior mean/variance")
    pgi.add_argument("--kernel", required=True)
    pgi.add_argument("--obs", help="CSV signal with observation flags (1D)")
    pgi.add_argument("--query", help="1D query range lo:hi")
    pgi.add_argument("--image", help="grayscale image (2D)")
    pgi.add_argument("--mask", help="mask image, white = observed (2D)")
    pgi.add_argument("--clean", help="clean reference for PSNR")
    pgi.add_argument("--noise", type=float, default=1e-3)
    pgi.add_argument("--out", required=True)
    pgi.set_defaults(func=cmd_gp_infer)

    pgr = pg_sub.add_parser("fit-rbf", help="grid-search RBF length scale")
    pgr.add_argument("--obs", required=True)
    pgr.add_argument("--noise", type=float, default=1e-3)
    pgr.add_argument("--grid", default="1:10", help="lo:hi or comma list")
    pgr.add_argument("--out")
    pgr.set_defaults(func=cmd_gp_fit_rbf)

    pd = top.add_parser("dip", help="fit a network to one corrupted signal")
    pd_sub = pd.add_subparsers(dest="cmd", required=True)
    pdr = pd_sub.add_parser("run", help="one (task, scheme) run")
    _add_spec_args(pdr)
    pdr.add_argument("--task", required=True, choices=inference.TASKS)
    pdr.add_argument("--scheme", required=True, choices=inference.SCHEMES)
    pdr.add_argument("--image")
    pdr.add_argument("--clean")
    pdr.add_argument("--mask")
    pdr.add_argument("--signal")
    pdr.add_argument("--config", help="inference config JSON")
    pdr.add_argument("--lr", type=float)
    pdr.add_argument("--iterations", type=int)
    pdr.add_argument("--burn-in", type=int, dest="burn_in")
    pdr.add_argument("--sigma-p", type=float, dest="sigma_p")
    pdr.add_argument("--weight-decay", type=float, dest="weight_decay")
    pdr.add_argument("--ema-decay", type=float, dest="ema_decay")
    pdr.add_argument("--eval-every", type=int, dest="eval_every")
    pdr.add_argument("--noise-sigma", type=float, default=None,
                     help="corruption noise scale on [0,1] (likelihood scale)")
    pdr.add_argument("--padding", default="reflect", choices=("reflect", "circular"))
    pdr.add_argument("--seed", type=int, default=0)
    pdr.add_argument("--out", required=True)
    pdr.set_defaults(func=cmd_dip_run)

    pe = top.add_parser("experiment", help="multi-run suites")
    pe_sub = pe.add_subparsers(dest="cmd", required=True)

    def _suite_args(sp, inpaint: bool):
        _add_spec_args(sp)
        sp.add_argument("--images", nargs="+", required=True)
        sp.add_argument("--schemes", default="sgd,sgd_input_avg,sgld")
        sp.add_argument("--seeds", type=int, default=5)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--burn-in", type=int, dest="burn_in")
        sp.add_argument("--lr", type=float)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", required=True)
        if inpaint:
            sp.add_argument("--drop", type=float, default=0.5)
            sp.set_defaults(sigma=0.0, sigma_scale="unit")
        else:
            sp.add_argument("--sigma", type=float, default=25.0)
            sp.add_argument("--sigma-scale", choices=("255", "unit"),
                            default="255", dest="sigma_scale")
            sp.set_defaults(drop=0.0)

    pds = pe_sub.add_parser("denoise-suite", help="scheme comparison on denoising")
    _suite_args(pds, inpaint=False)
    pds.set_defaults(func=cmd_experiment_denoise_suite)

    pis = pe_sub.add_parser("inpaint-suite", help="scheme comparison on inpainting")
    _suite_args(pis, inpaint=True)
    pis.set_defaults(func=cmd_experiment_inpaint_suite)

    psw = pe_sub.add_parser("sweep-channels",
                            help="network-vs-GP comparison across channel counts")
    psw.add_argument("--image", help="grayscale image; synthetic scene if omitted")
    psw.add_argument("--size", type=int, default=32)
    psw.add_argument("--channels", default="16,64,256")
    psw.add_argument("--scheme", default="sgd", choices=inference.SCHEMES)
    psw.add_argument("--drop", type=float, default=0.5)
    psw.add_argument("--noise", type=float, default=1e-3)
    psw.add_argument("--seeds", type=int, default=5)
    psw.add_argument("--seed", type=int, default=0)
    psw.add_argument("--iterations", type=int)
    psw.add_argument("--workers", type=int, default=1)
    psw.add_argument("--out", required=True)
    psw.set_defaults(func=cmd_experiment_sweep_channels)

    pt1 = pe_sub.add_parser("toy1d", help="1D covariance/prior/posterior artifacts")
    pt1.add_argument("--depths", default="1,2,4")
    pt1.add_argument("--filter-stds", default="0,2", dest="filter_stds")
    pt1.add_argument("--channels", type=int, default=64)
    pt1.add_argument("--samples", type=int, default=100)
    pt1.add_argument("--length", type=int, default=256)
    pt1.add_argument("--iterations", type=int, default=1500)
    pt1.add_argument("--seed", type=int, default=0)
    pt1.add_argument("--out", required=True)
    pt1.set_defaults(func=cmd_experiment_toy1d)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (gp.NumericalError, inference.DivergenceError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
