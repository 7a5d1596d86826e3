"""Command-line entry point: ``prestrained-lattice <subcommand> ...``.

Subcommands write CSV tables (header row plus a ``# config-hash`` comment
row) to ``--output`` or stdout.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, default_workers, load_config, parse_config
from .density import QW, W
from .discrete import DiscreteDeformation, discrete_energy
from .lattices import enumerate_shell, family_count, lattice_set, orbit_size, signed_orbit
from .metric import effective_metric, gaussian_curvature
from .minimize import gamma_study, minimize_continuum, minimize_discrete
from .representation import integral_representation

log = logging.getLogger("prestrained_lattice")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(rows, columns, digest, path=None):
    buf = io.StringIO()
    buf.write(f"# config-hash: {digest}\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def svg_plot(eps, values, hline=None, path=None, width=480, height=320):
    """Polyline of ``values`` against ``eps`` (log2 axis) with an optional horizontal rule."""
    pad = 40
    xs = [-math.log2(e) for e in eps]
    ys = [v for v in values if math.isfinite(v)] + ([hline] if hline is not None else [])
    lo, hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if hi - lo < 1e-300:
        lo, hi = lo - 0.5, hi + 0.5
    x0, x1 = min(xs), max(xs) if len(xs) > 1 else min(xs) + 1

    def px(x):
        return pad + (x - x0) / ((x1 - x0) or 1.0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - lo) / (hi - lo) * (height - 2 * pad)

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, values) if math.isfinite(y))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{pts}"/>',
    ]
    if hline is not None:
        parts.append(f'<line x1="{pad}" y1="{py(hline):.2f}" x2="{width - pad}" y2="{py(hline):.2f}" '
                     f'stroke="gray" stroke-dasharray="4,3"/>')
    parts.append(f'<text x="{pad}" y="{height - 8}" font-size="11">-log2(eps)</text>')
    parts.append(f'<text x="4" y="14" font-size="11">min E [{lo:.3g}, {hi:.3g}]</text>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _flag_digest(args):
    d = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


# subcommands -----------------------------------------------------------------


def cmd_lattices(args):
    shell = enumerate_shell(args.radius_sq, args.dim)
    rows = []
    if args.families:
        cols = ["radius_sq", "zeta", "xi", "pivot", "B", "det", "V_B"]
        for zeta in shell:
            for fam in lattice_set(zeta):
                rows.append({
                    "radius_sq": args.radius_sq, "zeta": " ".join(map(str, zeta)),
                    "xi": " ".join(map(str, fam.xi)), "pivot": fam.pivot,
                    "B": " ".join(map(str, fam.basis.ravel().tolist())), "det": fam.det,
                    "V_B": ";".join(" ".join(map(str, t)) for t in fam.translations.tolist()),
                })
    else:
        cols = ["radius_sq", "dim", "zeta", "k", "orbit_size", "orbit_count", "family_count", "families"]
        for zeta in shell:
            k = sum(1 for v in zeta if v)
            rows.append({
                "radius_sq": args.radius_sq, "dim": args.dim, "zeta": " ".join(map(str, zeta)), "k": k,
                "orbit_size": orbit_size(zeta), "orbit_count": len(signed_orbit(zeta)),
                "family_count": family_count(zeta), "families": len(lattice_set(zeta)),
            })
    write_csv(rows, cols, _flag_digest(args), args.output)
    return 0


def cmd_qw(args):
    vals = [float(v) for v in args.matrix.split(",")]
    n = int(round(math.sqrt(len(vals))))
    if n * n != len(vals) or n == 0:
        raise ConfigError(f"--matrix needs n*n comma-separated values, got {len(vals)}")
    M = np.array(vals).reshape(n, n)
    write_csv([{"W": float(W(M)), "QW": float(QW(M))}], ["W", "QW"], _flag_digest(args), args.output)
    return 0


def _curvature_reference(cfg, metric, x):
    name = cfg._get("metric", "name", "identity").lower()
    if name == "example1" and hasattr(metric, "profile"):
        g, dg, d2g = metric.profile
        s = x[..., 0]
        gv, g1, g2 = g(s), dg(s), d2g(s)
        return (-2 * gv * g2 + g1**2) / (2 * gv**2), np.zeros_like(s)
    if name == "example2" and getattr(metric, "angle_derivatives", (None, None))[1] is not None:
        d2w = metric.angle_derivatives[1]
        w = metric.angle
        return np.zeros(x.shape[:-1]), -d2w(x)[..., 0, 1] / np.sin(w(x))
    return np.full(x.shape[:-1], math.nan), np.full(x.shape[:-1], math.nan)


def cmd_curvature(cfg: RunConfig, args):
    domain = cfg.domain()
    metric = cfg.metric(domain.dim)
    if metric.dim != 2:
        raise ConfigError("curvature is only defined for two-dimensional metrics")
    m = cfg.grid()
    h = cfg.h()
    lo, hi = domain.bounding_box()
    t = (np.arange(m) + 0.5) / m
    X = np.stack(np.meshgrid(lo[0] + t * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1]), indexing="ij"), axis=-1)
    X = X.reshape(-1, 2)
    X = X[domain.contains(X)]
    kappa = gaussian_curvature(metric, X, h=h)
    kappa_bar = gaussian_curvature(effective_metric(metric), X, h=h)
    ref_bar, ref = _curvature_reference(cfg, metric, X)
    rows = [{"x1": x[0], "x2": x[1], "kappa": k, "kappa_bar": kb, "kappa_ref": r, "kappa_bar_ref": rb}
            for x, k, kb, r, rb in zip(X, kappa, kappa_bar, ref, ref_bar)]
    write_csv(rows, ["x1", "x2", "kappa", "kappa_bar", "kappa_ref", "kappa_bar_ref"], cfg.digest(),
              args.output or cfg.output())
    return 0


def _deformation(cfg, domain, eps, rng):
    phi = cfg.deformation(domain.dim)
    u = DiscreteDeformation.from_map(domain, eps, phi)
    noise = cfg.noise()
    if noise:
        u = u.with_values(u.values + noise * eps * rng.standard_normal(u.values.shape))
    return u


def cmd_energy(cfg: RunConfig, args, represent=False):
    domain = cfg.domain()
    metric = cfg.metric(domain.dim)
    cutoff = cfg.cutoff()
    rng = np.random.default_rng(cfg.seed())
    rows = []
    shells = []
    for eps in cfg.epsilons():
        u = _deformation(cfg, domain, eps, rng)
        if represent:
            rep = integral_representation(u, metric, cutoff, domain, workers=cfg.workers())
            row = rep.as_row()
            shells = [k for k in row if k.startswith("shell_")]
            rows.append(row)
        else:
            rows.append({"epsilon": eps, "E": discrete_energy(u, metric, cutoff, domain)})
    cols = ["epsilon", "E", "I", "gap", "bound"] + shells if represent else ["epsilon", "E"]
    write_csv(rows, cols, cfg.digest(), args.output or cfg.output())
    return 0


def cmd_minimize(cfg: RunConfig, args):
    domain = cfg.domain()
    metric = cfg.metric(domain.dim)
    cols = ["target", "epsilon", "value", "iterations", "grad_norm", "converged", "message"]
    rows = []
    if cfg.target() == "continuum":
        res = minimize_continuum(metric, domain, case=cfg.case(), resolution=cfg.resolution(),
                                 tol=cfg.tol(1e-10), max_iter=cfg.max_iter(), delta=cfg.delta())
        rows.append({"target": "continuum", "epsilon": "", "value": res.value, "iterations": res.iterations,
                     "grad_norm": res.grad_norm, "converged": res.converged, "message": res.message})
    else:
        cutoff = cfg.cutoff()
        rng = np.random.default_rng(cfg.seed())
        for eps in cfg.epsilons():
            init = _deformation(cfg, domain, eps, rng) if "deformation" in cfg.sections else None
            res = minimize_discrete(metric, cutoff, domain, eps, init=init, tol=cfg.tol(1e-9),
                                    max_iter=cfg.max_iter())
            rows.append({"target": "discrete", "epsilon": eps, "value": res.value, "iterations": res.iterations,
                         "grad_norm": res.grad_norm, "converged": res.converged, "message": res.message})
    write_csv(rows, cols, cfg.digest(), args.output or cfg.output())
    return 0


def cmd_study(cfg: RunConfig, args):
    domain = cfg.domain()
    metric = cfg.metric(domain.dim)
    res = gamma_study(metric, cfg.cutoff(), domain, cfg.epsilons(), case=cfg.case(),
                      resolution=cfg.resolution(), tol=cfg.tol(1e-9), max_iter=cfg.max_iter(),
                      noise=cfg.noise(), seed=cfg.seed())
    rows = [{"kind": "discrete", "epsilon": r.epsilon, "min_E": r.min_E, "iterations": r.iterations,
             "grad_norm": r.grad_norm, "converged": r.converged, "message": r.message} for r in res.rows]
    rows.append({"kind": "extrapolated", "min_E": res.extrapolated})
    rows.append({"kind": "continuum", "min_E": res.continuum})
    cols = ["kind", "epsilon", "min_E", "iterations", "grad_norm", "converged", "message"]
    write_csv(rows, cols, cfg.digest(), args.output or cfg.output())
    plot = args.plot or cfg.plot()
    if plot:
        svg_plot([r.epsilon for r in res.rows], [r.min_E for r in res.rows], res.continuum, plot)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="prestrained-lattice",
                                description="Prestrained lattice energies, representations and limits.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log the resolved configuration")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lattices", help="shells, orbits and lattice families of one radius")
    s.add_argument("--radius-sq", type=int, required=True)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--families", action="store_true", help="one row per family with B and V_B")
    s.add_argument("--output")
    s.set_defaults(func=cmd_lattices)

    s = sub.add_parser("qw", help="evaluate W and QW on a matrix")
    s.add_argument("--matrix", required=True, help="row-major comma-separated entries")
    s.add_argument("--output")
    s.set_defaults(func=cmd_qw)

    for name, func, helptext in [
        ("curvature", cmd_curvature, "Gaussian curvature of G and of its diagonal part on a grid"),
        ("energy", cmd_energy, "discrete lattice energy"),
        ("represent", lambda c, a: cmd_energy(c, a, represent=True), "energy, integral representation and gap"),
        ("minimize", cmd_minimize, "minimize the discrete energy or the continuum limit"),
        ("study", cmd_study, "discrete-to-continuum convergence study"),
    ]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--output")
        if name == "study":
            s.add_argument("--plot", help="optional SVG output")
        s.set_defaults(func=func, needs_config=True)
    return p


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "needs_config", False):
            cfg = load_config(args.config)
            log.info("resolved config %s: %s", cfg.digest(), json.dumps(cfg.resolved(), sort_keys=True))
            return args.func(cfg, args)
        default_workers()
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: config: {exc}\n")
        return 2
    except (ValueError, KeyError, FloatingPointError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


def main():
    sys.exit(run())


__all__ = ["run", "main", "build_parser", "write_csv", "svg_plot", "parse_config"]
