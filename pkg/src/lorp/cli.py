"""Command line interface.

Subcommands
-----------
``select``          score a candidate grid on a CSV dataset and pick a winner
``bench``           run a benchmark protocol cell and report its metrics
``grid-constants``  circulant-grid penalty constants (finite, limit, torus)
``oracle``          exact enumeration / grid-volume checks on tiny datasets

Exit codes: 0 success, 2 malformed input, 3 numerical degeneracy,
4 enumeration budget exceeded.  Reports embed a manifest and contain no
timestamps, so rerunning a command reproduces the output byte for byte.
The default seed honours the ``LORP_SEED`` environment variable.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import sys

import click
import numpy as np

from . import __version__
from .criteria import gcv as gcv_score
from .exceptions import (
    BudgetExceededError,
    DegenerateFitError,
    DegeneratePredictionError,
    DivergenceError,
    LossRankError,
    NotPositiveDefiniteError,
    SingularityError,
    SolveError,
    ValidationError,
)
from .experiments import ExperimentConfig, run_cell
from .gridknn import (
    GridSpec,
    c1_exact,
    c1_limit,
    c1_limit_k,
    c_d_taylor,
    c_infinite_dim,
    torus_constant,
)
from .lossrank import discrete_rank_oracle, grid_volume_oracle
from .regressors import Dataset, hat_matrix
from .selection import (
    ALPHA_MODES,
    ESTIMATOR_FAMILIES,
    LossRankRegressor,
    candidate_hat,
    default_grid,
)

EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_BUDGET = 4

_DEGENERACIES = (
    SingularityError,
    DegenerateFitError,
    DegeneratePredictionError,
    NotPositiveDefiniteError,
    SolveError,
    DivergenceError,
)


def guarded(fn):
    """Translate library errors into the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BudgetExceededError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_BUDGET)
        except _DEGENERACIES as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DEGENERATE)
        except (ValidationError, LossRankError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)

    return wrapper


# ---------------------------------------------------------------------------
# deterministic serialisation
# ---------------------------------------------------------------------------


def format_float(value) -> str:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError("reports cannot contain non-finite numbers")
    return format(value, ".17g")


def dump_json(obj) -> str:
    """JSON with floats at 17 significant digits (round-trip exact)."""

    def render(node, indent):
        pad = "  " * indent
        if isinstance(node, dict):
            if not node:
                return "{}"
            inner = ",\n".join(
                f"{pad}  {json.dumps(str(key))}: {render(val, indent + 1)}"
                for key, val in node.items()
            )
            return "{\n" + inner + "\n" + pad + "}"
        if isinstance(node, (list, tuple)):
            if not node:
                return "[]"
            inner = ",\n".join(f"{pad}  {render(val, indent + 1)}" for val in node)
            return "[\n" + inner + "\n" + pad + "]"
        if isinstance(node, bool):
            return "true" if node else "false"
        if node is None:
            return "null"
        if isinstance(node, (int, np.integer)):
            return str(int(node))
        if isinstance(node, (float, np.floating)):
            return format_float(node)
        if isinstance(node, str):
            return json.dumps(node)
        raise ValidationError(f"cannot serialise {type(node).__name__} to a report")

    return render(obj, 0) + "\n"


def manifest(command, parameters, seed=None):
    return {
        "command": command,
        "parameters": parameters,
        "seed": None if seed is None else int(seed),
        "package_version": __version__,
        "format_version": 1,
    }


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_float(v) if isinstance(v, float) else v for v in row]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# input parsing
# ---------------------------------------------------------------------------


def read_dataset(path) -> Dataset:
    """CSV with a header row; covariate columns first, response last."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty dataset file")
        ncol = len(header)
        if ncol < 2:
            raise ValidationError(
                f"{path}: need at least one covariate column plus the response"
            )
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != ncol:
                raise ValidationError(
                    f"{path}:{lineno}: expected {ncol} fields, got {len(row)}"
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field") from None
            xs.append(values[:-1])
            ys.append(values[-1])
    if len(xs) < 2:
        raise ValidationError(f"{path}: need at least two data rows")
    return Dataset(x=np.asarray(xs), y=np.asarray(ys))


def parse_grid(text):
    """Grid syntax: "a,b,c" literal, "lo:hi" integer range, "lo:hi:count" log-spaced."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        try:
            if len(parts) == 2:
                lo, hi = int(parts[0]), int(parts[1])
                if hi < lo:
                    raise ValidationError(f"empty grid range {text!r}")
                return tuple(range(lo, hi + 1))
            if len(parts) == 3:
                lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
                if lo <= 0 or hi <= lo or count < 2:
                    raise ValidationError(f"bad log grid {text!r}")
                return tuple(float(v) for v in np.geomspace(lo, hi, count))
        except ValueError:
            raise ValidationError(f"cannot parse grid {text!r}") from None
        raise ValidationError(f"cannot parse grid {text!r}")
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(int(token))
        except ValueError:
            try:
                out.append(float(token))
            except ValueError:
                raise ValidationError(f"grid entry {token!r} is not a number") from None
    if not out:
        raise ValidationError("grid is empty")
    return tuple(out)


def parse_values(text, name):
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            raise ValidationError(f"{name} entry {token!r} is not a number") from None
    if not values:
        raise ValidationError(f"{name} is empty")
    return values


def parse_bounds(text):
    bounds = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split(":")
        if len(parts) != 2:
            raise ValidationError(f"bounds entry {token!r} is not lo:hi")
        try:
            bounds.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"bounds entry {token!r} is not numeric") from None
    if not bounds:
        raise ValidationError("bounds are empty")
    return bounds


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@click.group()
@click.version_option(__version__, prog_name="lorp")
def main():
    """Loss-rank model selection for linear smoothers."""


@main.command()
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=click.Choice(ESTIMATOR_FAMILIES), default="knn",
              show_default=True)
@click.option("--grid", "grid_text", default=None,
              help='Candidates: "a,b,c", "lo:hi" (ints) or "lo:hi:count" (log-spaced).')
@click.option("--alpha-mode", type=click.Choice(ALPHA_MODES), default="optimize",
              show_default=True)
@click.option("--alpha", type=float, default=None, help="Value for --alpha-mode fixed.")
@click.option("--include-vn", is_flag=True, help="Add the unit-ball volume constant.")
@click.option("--y-domain", default=None,
              help="Finite response values; switches to exact enumeration ranks.")
@click.option("--metric", type=click.Choice(["euclidean", "circular"]),
              default="euclidean", show_default=True)
@click.option("--period", type=float, default=None, help="Period of the circular metric.")
@click.option("--criteria", "extra", default="",
              help="Extra per-candidate diagnostics from {gcv,aic,bic}.")
@click.option("--seed", type=int, default=None, envvar="LORP_SEED",
              help="Recorded in the manifest (selection itself is deterministic).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON report here.")
@guarded
def select(data, family, grid_text, alpha_mode, alpha, include_vn, y_domain,
           metric, period, extra, seed, out_path):
    """Score candidate complexities on DATA (CSV) and select by loss rank."""
    dataset = read_dataset(data)
    grid = parse_grid(grid_text) if grid_text else None
    domain = parse_values(y_domain, "y-domain") if y_domain else None
    est = LossRankRegressor(
        family=family, grid=grid, alpha_mode=alpha_mode, alpha=alpha,
        include_vn=include_vn, y_domain=domain, metric=metric, period=period,
    )
    est.fit(dataset.x, dataset.y)

    extra_names = [name.strip() for name in extra.split(",") if name.strip()]
    for name in extra_names:
        if name not in ("gcv", "aic", "bic"):
            raise ValidationError(f"unknown criterion {name!r}; choose from gcv,aic,bic")
    candidates = []
    n = dataset.n
    for entry in est.candidates_:
        record = dict(entry)
        if extra_names:
            reg = candidate_hat(family, entry["complexity"], dataset,
                                metric=metric, period=period)
            mat = hat_matrix(reg)
            resid = dataset.y - mat @ dataset.y
            rss = float(resid @ resid)
            d_eff = float(np.trace(mat))
            for name in extra_names:
                if name == "gcv":
                    record["gcv"] = gcv_score(reg, dataset.y)
                elif rss <= 0.0:
                    record[name] = None
                elif name == "aic":
                    record["aic"] = n * math.log(rss / n) + 2.0 * d_eff
                else:
                    record["bic"] = n * math.log(rss / n) + d_eff * math.log(n)
        candidates.append(record)

    report = {
        "manifest": manifest(
            "select",
            {
                "data": str(data), "family": family,
                "grid": None if grid is None else list(grid),
                "alpha_mode": alpha_mode, "alpha": alpha,
                "include_vn": include_vn,
                "y_domain": None if domain is None else list(domain),
                "metric": metric, "period": period,
                "criteria": extra_names,
            },
            seed=seed,
        ),
        "n": dataset.n,
        "p": dataset.p,
        "candidates": candidates,
        "best": {
            "complexity": est.best_complexity_,
            "score": est.best_score_,
            "index": est.best_index_,
        },
        "fitted_values": [float(v) for v in est.fitted_values_],
    }
    text = dump_json(report)
    if out_path:
        write_text(out_path, text)
    for entry in candidates:
        score = "degenerate" if entry["degenerate"] else format_float(entry["score"])
        click.echo(f"candidate {entry['complexity']}: score {score}")
    click.echo(f"selected {family} complexity {est.best_complexity_}")


@main.command()
@click.argument("protocol",
                type=click.Choice(["table1", "table2", "figure1-knn", "figure1-spline"]))
@click.option("--n", type=int, default=100, show_default=True)
@click.option("--d", type=int, default=None, help="Covariate count (table1).")
@click.option("--snr", type=float, default=None, help="Signal-to-noise ratio (table1).")
@click.option("--sigma", type=float, default=None, help="Noise level (table2, figure1).")
@click.option("--k-max", type=int, default=None,
              help="Largest basis order for table2 (default min(163, n//3)).")
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, envvar="LORP_SEED", show_default=True)
@click.option("--grid", "grid_text", default=None,
              help="Complexity grid override for the figure1 protocols.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker threads across replications.")
@click.option("--out", "prefix", type=click.Path(), default=None,
              help="Write PREFIX.json and PREFIX.csv.")
@guarded
def bench(protocol, n, d, snr, sigma, k_max, reps, seed, grid_text, jobs, prefix):
    """Run one benchmark cell and print its summary table as CSV."""
    config = ExperimentConfig(
        protocol=protocol.replace("-", "_"),
        n=n, replications=reps, seed=seed, d=d, snr=snr, sigma=sigma,
        k_max=k_max, grid=parse_grid(grid_text) if grid_text else None, jobs=jobs,
    )
    result = run_cell(config)
    header, rows = result.csv_rows()
    table = csv_text(header, rows)
    click.echo(table, nl=False)
    if prefix:
        write_text(f"{prefix}.csv", table)
        report = {
            "manifest": manifest("bench", config.to_dict(), seed=seed),
            "result": result.to_dict(),
        }
        write_text(f"{prefix}.json", dump_json(report))


@main.command("grid-constants")
@click.option("--n1", type=int, default=None, help="Sites per axis.")
@click.option("--k1", type=int, default=None, help="Neighbours per axis (odd).")
@click.option("--dim", type=int, default=1, show_default=True)
@click.option("--s-max", type=int, default=None,
              help="Also print the Taylor-series value with this many terms.")
@click.option("--limit", is_flag=True, help="Large-grid limit at fixed k1.")
@click.option("--limit-inf", is_flag=True, help="Joint large-grid, large-k1 limit.")
@click.option("--dim-inf", is_flag=True, help="Large-dimension limit (exactly 1.5).")
@guarded
def grid_constants(n1, k1, dim, s_max, limit, limit_inf, dim_inf):
    """Per-parameter penalty constants of kNN on circular grids, as CSV."""
    rows = []
    if n1 is not None or s_max is not None:
        if n1 is None or k1 is None:
            raise ValidationError("finite-grid constants need both --n1 and --k1")
        spec = GridSpec(n1=n1, k1=k1, dim=dim)
        if dim == 1:
            rows.append(["c_exact", n1, k1, 1, c1_exact(n1, k1)])
        else:
            rows.append(["c_torus", n1, k1, dim, torus_constant(spec)])
        if s_max is not None:
            rows.append(["c_taylor", n1, k1, dim, c_d_taylor(spec, s_max)])
    if limit:
        if k1 is None:
            raise ValidationError("--limit needs --k1")
        rows.append(["c_limit_k", "", k1, 1, c1_limit_k(k1)])
    if limit_inf:
        rows.append(["c_limit", "", "", 1, c1_limit()])
    if dim_inf:
        rows.append(["c_dim_inf", "", "", "", c_infinite_dim()])
    if not rows:
        raise ValidationError(
            "nothing to compute: pass --n1/--k1, --limit, --limit-inf or --dim-inf"
        )
    click.echo(csv_text(["quantity", "n1", "k1", "dim", "value"], rows), nl=False)


@main.command()
@click.argument("mode", type=click.Choice(["rank", "volume"]))
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=click.Choice(ESTIMATOR_FAMILIES), default="poly",
              show_default=True)
@click.option("--grid", "grid_text", default=None,
              help="Candidate complexities (family default when omitted).")
@click.option("--y-domain", default=None, help="Finite response values (rank mode).")
@click.option("--bounds", default=None, help='Volume box, e.g. "0:2,0:2" (volume mode).')
@click.option("--eps", type=float, default=None, help="Grid spacing (volume mode).")
@click.option("--metric", type=click.Choice(["euclidean", "circular"]),
              default="euclidean", show_default=True)
@click.option("--period", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@guarded
def oracle(mode, data, family, grid_text, y_domain, bounds, eps, metric, period, out_path):
    """Exact rank (enumeration) or loss-volume (grid count) per candidate."""
    dataset = read_dataset(data)
    grid = parse_grid(grid_text) if grid_text else default_grid(family, dataset)
    rows = []
    if mode == "rank":
        if not y_domain:
            raise ValidationError("rank mode needs --y-domain")
        domain = parse_values(y_domain, "y-domain")
        for value in grid:
            reg = candidate_hat(family, value, dataset, metric=metric, period=period)
            rows.append([value, discrete_rank_oracle(reg, domain, dataset)])
        header = ["complexity", "rank"]
    else:
        if not bounds or eps is None:
            raise ValidationError("volume mode needs --bounds and --eps")
        box = parse_bounds(bounds)
        if len(box) != dataset.n:
            raise ValidationError(
                f"bounds cover {len(box)} coordinates but the dataset has {dataset.n}"
            )
        for value in grid:
            reg = candidate_hat(family, value, dataset, metric=metric, period=period)
            mat = hat_matrix(reg)
            resid = dataset.y - mat @ dataset.y
            level = float(resid @ resid)

            def loss(block, mat=mat):
                r = block - block @ mat.T
                return np.einsum("ij,ij->i", r, r)

            rows.append([value, level, grid_volume_oracle(loss, box, level, eps)])
        header = ["complexity", "observed_loss", "volume"]
    table = csv_text(header, rows)
    click.echo(table, nl=False)
    if out_path:
        params = {
            "mode": mode, "data": str(data), "family": family,
            "grid": list(grid), "y_domain": y_domain, "bounds": bounds,
            "eps": eps, "metric": metric, "period": period,
        }
        report = {
            "manifest": manifest("oracle", params),
            "rows": [dict(zip(header, row)) for row in rows],
        }
        write_text(out_path, dump_json(report))


if __name__ == "__main__":
    main()
