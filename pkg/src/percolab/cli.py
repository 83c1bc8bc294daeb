"""Command-line front end.

Every subcommand resolves its configuration as: built-in defaults, then the
--config file (JSON or TOML mirroring the flag names), then explicit flags.
Results go to stdout as JSON, or into --out DIR as config-echoing JSON plus
plot-ready CSV when --format csv.
"""

import json
import pathlib
import sys

import click

from . import experiments as ex
from . import threshold as th
from .lattice import Rect
from .models import bernoulli_p, h_from_p

try:
    import tomllib
except ImportError:  # pragma: no cover - python < 3.11
    import tomli as tomllib


def _parse_seed(ctx, param, value):
    if value is None:
        return None
    try:
        return int(str(value), 0)  # decimal or 0x-prefixed hex
    except ValueError:
        raise click.BadParameter(f"seed {value!r} is not an integer")


def _floats(s):
    return [float(x) for x in str(s).split(",") if x.strip()]


def _ints(s):
    return [int(x) for x in str(s).split(",") if x.strip()]


def _load_config(path):
    if path is None:
        return {}
    p = pathlib.Path(path)
    data = p.read_bytes()
    if p.suffix == ".toml":
        return tomllib.loads(data.decode())
    return json.loads(data)


_DEFAULTS = {"model": "bernoulli", "seed": 0, "replicas": 1000, "n": 32,
             "beta": 0.3, "h": 0.0, "p": None, "tmax": 2 ** 10,
             "out": None, "format": "json"}


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="JSON or TOML file mirroring the flags; flags override.")
@click.option("--model", type=click.Choice(["bernoulli", "majority", "ising"]),
              default=None)
@click.option("--seed", callback=_parse_seed, default=None,
              help="Master seed, decimal or hex (0x...).")
@click.option("--replicas", type=int, default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Output directory; omit to print JSON to stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default=None)
@click.option("--beta", type=float, default=None)
@click.option("--h", type=float, default=None)
@click.option("--p", type=float, default=None,
              help="Occupation probability; converted to h for k=1 models.")
@click.option("--n", type=int, default=None)
@click.option("--tmax", type=int, default=None)
@click.pass_context
def main(ctx, config, model, seed, replicas, out, fmt, beta, h, p, n, tmax):
    """Percolation laboratory: dependent 2D spin models with exact
    i.i.d. representations, perfect sampling, and sharp-threshold
    diagnostics."""
    cfg = dict(_DEFAULTS)
    cfg.update({k: v for k, v in _load_config(config).items()
                if k in _DEFAULTS})
    flags = {"model": model, "seed": seed, "replicas": replicas, "out": out,
             "format": fmt, "beta": beta, "h": h, "p": p, "n": n,
             "tmax": tmax}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if cfg["p"] is not None:
        cfg["h"] = h_from_p(cfg["p"])
    ctx.obj = cfg


def _get_model(cfg):
    return ex.get_model(cfg["model"], beta=cfg["beta"], t_max=cfg["tmax"])


def _emit(cfg, name, results, rows=None):
    """JSON summary (config echo + build id) to stdout or --out DIR;
    EstimateRow tables also as CSV when requested."""
    text = ex.summary_json(cfg, results)
    if cfg["out"] is None:
        click.echo(text)
        return
    outdir = pathlib.Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / f"{name}.json").write_text(text + "\n")
    if rows is not None and cfg["format"] == "csv":
        with open(outdir / f"{name}.csv", "w", newline="") as f:
            ex.rows_to_csv(rows, f)
    click.echo(f"wrote {outdir / name}.json")


@main.command()
@click.option("--h-grid", default="-0.5,-0.25,0,0.25,0.5",
              help="Comma-separated h values.")
@click.option("--direction", type=click.Choice(["horizontal", "vertical"]),
              default="horizontal")
@click.pass_obj
def crossing(cfg, h_grid, direction):
    """Crossing-probability curve over an h grid (common random numbers)."""
    model = _get_model(cfg)
    rect = Rect(0, 0, cfg["n"], cfg["n"])
    rows, violations = ex.crossing_curve(model, rect, _floats(h_grid),
                                         cfg["replicas"], cfg["seed"],
                                         direction=direction)
    _emit(cfg, "crossing", {"rows": rows, "monotone_violations": violations},
          rows=rows)
    if violations:
        sys.exit(1)


@main.command()
@click.option("--target", type=float, default=0.5)
@click.option("--tol", type=float, default=1e-2)
@click.option("--bracket", default="-2,2")
@click.pass_obj
def critical(cfg, target, tol, bracket):
    """Bisection estimate of the critical h (crossing probability = target)."""
    model = _get_model(cfg)
    lo, hi = _floats(bracket)
    est = ex.estimate_critical(model, cfg["n"], target=target, tol=tol,
                               replicas=cfg["replicas"], seed=cfg["seed"],
                               bracket=(lo, hi))
    res = {"h_hat": est.h_hat, "lo": est.lo, "hi": est.hi, "n": est.n,
           "low_confidence": est.low_confidence}
    if model.family.k == 1:
        res["p_hat"] = bernoulli_p(est.h_hat)
    _emit(cfg, "critical", res, rows=est.probes)


@main.command()
@click.option("--tol", type=float, default=1e-2)
@click.option("--bracket", default="-2,2")
@click.pass_obj
def matching(cfg, tol, bracket):
    """Check h_c + h*_c = 0 (and p_c + p*_c = 1 when applicable)."""
    model = _get_model(cfg)
    lo, hi = _floats(bracket)
    rep = ex.matching_relation_check(model, cfg["n"], tol=tol,
                                     replicas=cfg["replicas"],
                                     seed=cfg["seed"], bracket=(lo, hi))
    _emit(cfg, "matching", rep)


@main.command()
@click.option("--big-n", "big_n", type=int, default=16,
              help="N in the V(3N, N) probe.")
@click.option("--eps-hat", type=float, default=0.01)
@click.pass_obj
def fsc(cfg, big_n, eps_hat):
    """Finite-size criterion: P(V(3N,N)) < eps-hat, with tail evidence."""
    model = _get_model(cfg)
    res = ex.finite_size_check(model, cfg["h"], big_n, eps_hat=eps_hat,
                               replicas=cfg["replicas"], seed=cfg["seed"])
    _emit(cfg, "fsc", res)


@main.command()
@click.option("--window-side", type=int, default=201)
@click.option("--fit-range", default="10,100")
@click.option("--targets", default="plus,minus_star")
@click.pass_obj
def tail(cfg, window_side, fit_range, targets):
    """Origin-cluster size histograms and exponential tail fits."""
    model = _get_model(cfg)
    half = window_side // 2
    window = Rect(-half, -half, half, half)
    res = ex.cluster_tail_experiment(
        model, cfg["h"], window, cfg["replicas"], tuple(_ints(fit_range)),
        cfg["seed"], targets=tuple(targets.split(",")))
    _emit(cfg, "tail", res)


@main.command()
@click.option("--rho-list", default="0.5,1,2")
@click.option("--n-list", default="8,16,32")
@click.pass_obj
def rsw(cfg, rho_list, n_list):
    """Crossing estimates over an aspect-ratio / scale grid."""
    model = _get_model(cfg)
    res = ex.rsw_scan(model, cfg["h"], _floats(rho_list), _ints(n_list),
                      cfg["replicas"], cfg["seed"])
    res["grid"] = {f"rho={r},n={n}": row for (r, n), row in
                   res["grid"].items()}
    _emit(cfg, "rsw", res)


@main.command()
@click.option("--n-list", default="8,16,32")
@click.pass_obj
def influence(cfg, n_list):
    """Max pivotal-index probability for H(3n, n) over a scale list."""
    model = _get_model(cfg)
    res = [ex.influence_scan(model, n, cfg["h"], cfg["replicas"], cfg["seed"])
           for n in _ints(n_list)]
    for r in res:
        r["per_index"] = {str(k): v for k, v in r["per_index"].items()}
    _emit(cfg, "influence", res)


@main.command()
@click.option("--window-side", type=int, default=5)
@click.option("--samples", type=int, default=20000)
@click.pass_obj
def dlr(cfg, window_side, samples):
    """Single-site conditional check against the heat-bath kernel."""
    half = window_side // 2
    window = Rect(-half, -half, half, half)
    res = ex.dlr_check(cfg["beta"], cfg["h"], window, samples, cfg["seed"],
                       t_max=cfg["tmax"])
    _emit(cfg, "dlr", res)


@main.command()
@click.option("--mode", type=click.Choice(["ising_boundary", "event_pair"]),
              default="ising_boundary")
@click.option("--n-list", default="2,4,8")
@click.option("--box-side", type=int, default=16)
@click.pass_obj
def mixing(cfg, mode, n_list, box_side):
    """Boundary-influence decay or event-pair covariance decay."""
    params = {"beta": cfg["beta"], "h": cfg["h"], "model": cfg["model"],
              "box_side": box_side, "t_max": cfg["tmax"]}
    res = ex.mixing_check(mode, params, _ints(n_list), cfg["replicas"],
                          cfg["seed"])
    _emit(cfg, "mixing", res)


@main.command()
@click.option("--event", default="maj3",
              help="Built-in event name or truth-table spec.")
@click.option("--h2", type=float, default=None,
              help="Upper endpoint for an interval report over [h, h2].")
@click.pass_obj
def threshold(cfg, event, h2):
    """Exact enumeration: probability, pivotal probabilities, derivative,
    and sharp-threshold constants for a small increasing event."""
    spec = th.load_event(event)
    model = _get_model(cfg)
    if h2 is not None:
        rep = th.corollary_interval_report(spec, model.family, cfg["h"], h2)
    else:
        p = cfg["p"] if cfg["p"] is not None else bernoulli_p(cfg["h"])
        rep = th.talagrand_report(spec, p)
    _emit(cfg, "threshold", rep.to_dict())


@main.command()
@click.option("--sides", default="8,16,32,64")
@click.pass_obj
def audit(cfg, sides):
    """Sample fields and run the exact duality audit on each."""
    model = _get_model(cfg)
    auditor = ex.AuditCounter()
    for side in _ints(sides):
        rect = Rect(0, 0, side, side)
        spins = ex.sample_fields_batch(model, rect, cfg["h"], cfg["seed"],
                                       range(cfg["replicas"]))
        for r in range(cfg["replicas"]):
            auditor.audit(spins[r], rect)
    _emit(cfg, "audit", {"fields_checked": auditor.checked, "violations": 0})


if __name__ == "__main__":
    main()
