"""
trajlet.cli.util

Utility functions for the CLI.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import csv
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Type, TypeVar

from click import BadParameter, ClickException, echo

from ..exceptions import ConfigError, TrajletError
from ..loader import load_trajectories, load_yaml
from ..models.compat import StrictModel, parse_model
from .theme import select_theme


__all__ = (
    'catchall',
    'display_report',
    'display_train_summary',
    'load_config_sections',
    'load_data',
    'merge_config',
    'parse_ivf',
    'resplit',
    'write_csv',
)


M = TypeVar('M', bound=StrictModel)


def resplit(strs: Iterable[str], sep=',') -> List[str]:
    """
    Takes a list of strings which may be comma-separated to indicate multiple
    values. Returns a list of strings with the commas removed and those values
    expanded, whitespace stripped, and any empty strings omitted.

    Example:
        >>> resplit(['foo', ' ', 'bar,baz', 'qux,,quux'])
        ['foo', 'bar', 'baz', 'qux', 'quux']
    """

    # joins 'em, splits 'em, strips 'em, and filters 'em
    return list(filter(None, map(str.strip, sep.join(strs).split(sep))))


def catchall(func):
    """
    Decorator that catches and formats exceptions for CLI display.

    TrajletError exceptions are reported as ``trajlet: <category>: <message>``
    on stderr with exit status 1, as are OS errors such as a missing file,
    under the category ``io-error``. Other exceptions are displayed and
    re-raised.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)

        except TrajletError as e:
            echo(f"trajlet: {e.category}: {e}", err=True)
            sys.exit(1)

        except KeyboardInterrupt:
            echo("\n[Interrupted]", err=True)
            sys.exit(130)

        except ClickException:
            raise

        except OSError as e:
            echo(f"trajlet: io-error: {e}", err=True)
            sys.exit(1)

        except Exception as e:
            # Unexpected errors - display and re-raise for debugging
            echo(f"Unexpected Error: {e}", err=True)
            raise

    return wrapper


def parse_ivf(value: Optional[str]) -> Optional[Tuple[int, int]]:
    """
    Parse an ``nlist,nprobe`` option value. ``None`` passes through.
    """

    if value is None:
        return None

    parts = resplit([value])
    try:
        nlist, nprobe = (int(p) for p in parts)
    except ValueError:
        raise BadParameter(f"expected NLIST,NPROBE, got {value!r}") from None

    if nlist < 1 or nprobe < 1:
        raise BadParameter(f"NLIST and NPROBE must be positive, got {value!r}")
    return nlist, nprobe


def load_config_sections(
        filename: Optional[str],
        sections: Sequence[str]) -> Dict[str, Dict[str, Any]]:
    """
    Read a YAML config file holding one mapping per named section. A
    missing filename gives empty sections.

    :raises ConfigError: for an unknown section, or a section that is not
      a mapping
    """

    found: Dict[str, Dict[str, Any]] = {name: {} for name in sections}
    if not filename:
        return found

    data = load_yaml(filename) or {}
    if not isinstance(data, dict):
        raise ConfigError(ValueError("must hold a mapping"), "config file",
                          filename=filename)

    for name, value in data.items():
        if name not in found:
            raise ConfigError(ValueError(f"unknown section {name!r}"),
                              "config file", filename=filename)
        if not isinstance(value, dict):
            raise ConfigError(ValueError(f"section {name!r} must be a mapping"),
                              "config file", filename=filename)
        found[name] = dict(value)

    return found


def merge_config(
        model: Type[M],
        section: Dict[str, Any],
        filename: Optional[str] = None,
        **flags: Any) -> M:
    """
    Validate ``section`` updated by every flag that was actually given,
    that is, is not None.

    :raises ConfigError: if the merged values do not validate
    """

    merged = dict(section)
    merged.update((k, v) for k, v in flags.items() if v is not None)
    return parse_model(model, merged, what=model.__name__, filename=filename)


def load_data(paths: Sequence[str], recursive: bool = False):
    return load_trajectories(list(paths), recursive=recursive)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """
    Write ``rows`` under ``header``. Returns the number of rows written.
    """

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as fd:
        writer = csv.writer(fd, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    return count


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def display_report(report, theme=None):
    """
    Display the aggregates of a retrieval report.
    """

    if theme is None:
        theme = select_theme()

    style = theme.style
    secho = theme.secho

    secho(f"Engine {report.engine}, k={report.k}", tp='heading')
    echo(f"  {style('bank size:', tp='label')} {style(report.bank_size, tp='value')}")
    echo(f"  {style('queries:', tp='label')} {style(report.query_count, tp='value')}")

    for name, title in (('min_ade', 'minADE'), ('avg_ade', 'avgADE'),
                        ('min_fde', 'minFDE'), ('avg_fde', 'avgFDE'),
                        ('purity', 'purity')):
        value = _fmt(getattr(report, name))
        echo(f"  {style(title + ':', tp='label')} {style(value, tp='value')}")


def display_train_summary(summary, out_path=None, theme=None):
    if theme is None:
        theme = select_theme()

    secho = theme.secho

    msg = (f"Trained {summary.steps_completed} steps"
           f" ({summary.skipped_steps} skipped)")
    secho(msg, tp='summary_text')

    count = max(1, len(summary.records) // 10)
    first = summary.mean_loss(0, count)
    last = summary.mean_loss(len(summary.records) - count, len(summary.records))
    secho(f"mean loss: first {_fmt(first)}, last {_fmt(last)}", tp='dim_text')

    if out_path is not None:
        secho(f"Checkpoint written to {out_path}", tp='dim_text')


# The end.
