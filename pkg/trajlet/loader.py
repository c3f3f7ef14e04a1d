"""
trajlet.loader

Trajectory file (``.trj``) reading and writing, path discovery, and the
YAML helpers used for configuration files, manifests and logs.

A ``.trj`` file holds one trajectory per line::

    # id        label       points
    straight-0  straight    0.0:0.0,1.0:0.0,2.0:0.0
    turn-7      left-turn   0.0:0.0,1.0:0.1,1.9:0.4
    raw-3                   5.5:2.0,5.5:3.0

Fields are separated by whitespace, the label is optional, and each point
is an ``x:y`` pair. Blank lines and lines starting with ``#`` are skipped.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
import re
import sys
from itertools import chain
from math import isfinite
from pathlib import Path
from typing import (
    Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Protocol,
    Sequence, TextIO, Type, Union,
)

from yaml import YAMLError as PyYAMLError, dump, safe_load
try:
    from yaml import CSafeDumper as SafeDumper
except ImportError:
    from yaml import SafeDumper  # type: ignore

from .core import PointsLike, Trajectory, as_points
from .exceptions import InvalidTrajectory, ParseError, TrajletError


__all__ = (
    'LoadedTrajectory',
    'LoaderProtocol',
    'MultiLoader',
    'TRJLoader',

    'combine_find_files',
    'find_files',
    'format_trajectory',
    'load_trajectories',
    'load_yaml',
    'parse_trajectory_line',
    'pretty_yaml',
    'save_trajectories',
    'yaml_line',
)


logger = logging.getLogger(__name__)


_NUMBER_SPLIT = re.compile(r'[,:]')


def parse_trajectory_line(
        line: str,
        filename: Optional[str] = None,
        lineno: Optional[int] = None) -> Optional[Trajectory]:
    """
    Parse one ``.trj`` line. Returns None for blank and comment lines.

    :raises ParseError: for a malformed line, an odd coordinate count, a
      non-numeric or non-finite coordinate, or fewer than 2 points
    """

    text = line.strip()
    if not text or text.startswith('#'):
        return None

    def fail(reason: str, cause: Optional[BaseException] = None):
        return ParseError(reason, filename=filename, lineno=lineno,
                          original_exception=cause)

    fields = text.split()
    if len(fields) == 2:
        traj_id, label, coords = fields[0], None, fields[1]
    elif len(fields) == 3:
        traj_id, label, coords = fields
    else:
        raise fail(f"expected 'id [label] points', found {len(fields)} fields")

    values = _NUMBER_SPLIT.split(coords)
    if len(values) % 2:
        raise fail(f"odd coordinate count ({len(values)} values)")

    pairs = coords.split(',')
    if any(pair.count(':') != 1 for pair in pairs):
        raise fail("each point must be a single x:y pair")

    try:
        numbers = [float(v) for v in values]
    except ValueError as e:
        raise fail("coordinate is not a number", e) from e

    if not all(map(isfinite, numbers)):
        raise fail("non-finite coordinate")

    if len(numbers) < 4:
        raise fail(f"trajectory {traj_id!r} needs at least 2 points")

    try:
        return Trajectory(
            id=traj_id,
            points=[numbers[i:i + 2] for i in range(0, len(numbers), 2)],
            label=label)
    except TrajletError as e:
        raise fail(str(e.message), e) from e


def format_trajectory(
        traj_id: str,
        points: PointsLike,
        label: Optional[str] = None) -> str:
    """
    Format one ``.trj`` line, without the newline. Coordinates are written
    with ``repr`` so reading them back gives the same floats.

    :raises InvalidTrajectory: if the id or label is empty or holds
      whitespace or a ``:``
    """

    for what, value in (('id', traj_id), ('label', label)):
        if value is None and what == 'label':
            continue
        if not value or any(c.isspace() for c in value) or ':' in value:
            raise InvalidTrajectory(f"unusable {what} {value!r} for a .trj file")

    coords = ','.join(f"{float(x)!r}:{float(y)!r}" for x, y in as_points(points))
    if label:
        return f"{traj_id} {label} {coords}"
    return f"{traj_id} {coords}"


class LoadedTrajectory(NamedTuple):
    """
    A trajectory and the file line it was read from.
    """

    trajectory: Trajectory
    filename: str
    lineno: int


class LoaderProtocol(Protocol):
    extensions: Sequence[str]

    def __init__(self, filename: Union[str, Path]):
        ...

    def load(self) -> Iterator[LoadedTrajectory]:
        ...


class TRJLoader(LoaderProtocol):
    """
    Loads the trajectories of a single ``.trj`` file, in file order, each
    with its line number.
    Can be added to a :class:`MultiLoader`.
    """

    extensions = (".trj",)


    def __init__(self, filename: Union[str, Path]):
        filename = filename and Path(filename)
        if not (filename and filename.is_file()):
            raise ValueError("filename must be a file")

        self.filename = str(filename)


    def load(self) -> Iterator[LoadedTrajectory]:
        logger.debug(f"Loading trajectories from {self.filename}")
        with open(self.filename, 'r', encoding='utf-8') as fd:
            for lineno, line in enumerate(fd, 1):
                traj = parse_trajectory_line(line, self.filename, lineno)
                if traj is not None:
                    yield LoadedTrajectory(traj, self.filename, lineno)


class MultiLoader:
    """
    Dispatches files to loaders by extension and yields their contents in
    a predictable order.
    """

    def __init__(self, loader_types: List[Type[LoaderProtocol]]):
        self.extmap: Dict[str, Type[LoaderProtocol]] = {}

        for loader in loader_types:
            self.add_loader_type(loader)


    def add_loader_type(self, loader_type: Type[LoaderProtocol]) -> None:
        for ext in loader_type.extensions:
            self.extmap[ext] = loader_type


    def loader(self, filename: Union[str, Path]) -> LoaderProtocol:
        """
        :raises ValueError: If no loader type handles the filename's suffix
        """

        cls = self.extmap.get(Path(filename).suffix)
        if not cls:
            raise ValueError(f"No loader accepting filename {filename}")
        return cls(filename)


    def load(
            self,
            paths: Iterable[Union[str, Path]],
            recursive: bool = False) -> Iterator[Any]:

        filepaths = combine_find_files(paths, self.extmap, recursive=recursive)
        return chain(*(self.loader(f).load() for f in filepaths))


def load_trajectories(
        paths: Union[str, Path, Iterable[Union[str, Path]]],
        recursive: bool = False) -> List[Trajectory]:
    """
    Load every trajectory from the given ``.trj`` files or directories.

    :raises ParseError: on a malformed line, or an id seen twice
    """

    if isinstance(paths, (str, Path)):
        paths = [paths]

    seen = set()
    found: List[Trajectory] = []

    loaded = MultiLoader([TRJLoader]).load(paths, recursive=recursive)
    for traj, filename, lineno in loaded:
        if traj.id in seen:
            raise ParseError(f"duplicate trajectory id {traj.id!r}",
                             filename, lineno)
        seen.add(traj.id)
        found.append(traj)

    logger.debug(f"Loaded {len(found)} trajectories")
    return found


def save_trajectories(
        trajectories: Iterable[Any],
        out: Union[str, Path, TextIO],
        header: Optional[str] = None) -> int:
    """
    Write trajectories (or normalized trajectories) to a ``.trj`` file or
    stream. Returns the number written.
    """

    if isinstance(out, (str, Path)):
        with open(out, 'w', encoding='utf-8', newline='\n') as fd:
            return save_trajectories(trajectories, fd, header)

    count = 0
    if header:
        for line in header.splitlines():
            out.write(f"# {line}\n")

    for traj in trajectories:
        traj_id = getattr(traj, 'id', None) or getattr(traj, 'source_id')
        out.write(format_trajectory(traj_id, traj.points, traj.label))
        out.write('\n')
        count += 1

    return count


def find_files(
        pathname: Union[str, Path],
        extensions: Iterable[str] = (".trj",),
        recursive: bool = False,
        strict: bool = True) -> List[Path]:
    """
    Find files with the given extensions at ``pathname``, which may be a
    single file or a directory.

    :raises FileNotFoundError: If strict is True and the path doesn't exist
    """

    if not pathname:
        raise ValueError("pathname is required")

    path = Path(pathname)

    if strict and not path.exists():
        raise FileNotFoundError(f"Path not found: {path}")

    if path.is_file() and path.suffix in extensions:
        return [path]

    pglob = path.rglob if recursive else path.glob

    found: List[Path] = []
    for ext in extensions:
        found.extend(p for p in pglob(f"*{ext}") if p.is_file())

    return sorted(found)


def combine_find_files(
        pathlist: Iterable[Union[str, Path]],
        extensions: Iterable[str] = (".trj",),
        recursive: bool = False,
        strict: bool = True) -> List[Path]:

    found: List[Path] = []
    for path in pathlist:
        found.extend(find_files(path, extensions, recursive=recursive, strict=strict))
    return found


def load_yaml(filename: Union[str, Path]) -> Any:
    """
    Load the single YAML (or JSON) document in ``filename``.

    :raises ParseError: if the document does not parse
    """

    with open(filename, 'r', encoding='utf-8') as fd:
        logger.debug(f"Loading YAML file {filename}")
        try:
            return safe_load(fd)
        except PyYAMLError as e:
            lineno = None
            mark = getattr(e, 'problem_mark', None)
            if mark is not None:
                lineno = mark.line + 1
            raise ParseError("invalid YAML", filename=str(filename),
                             lineno=lineno, original_exception=e) from e


class PrettyYAML(SafeDumper):
    """
    Block-style dumper that indents list items under their key.
    """

    def increase_indent(self, flow=False, indentless=False):
        return super().increase_indent(flow, False)


def pretty_yaml(doc: Any, out: TextIO = sys.stdout, **opts) -> None:
    params = {
        'default_flow_style': False,
        'sort_keys': True,
        'explicit_start': False,
    }
    params.update(opts)
    dump(doc, Dumper=PrettyYAML, stream=out, **params)


def yaml_line(record: Dict[str, Any]) -> str:
    """
    A single-line YAML flow mapping for ``record``, keys in insertion
    order, with the trailing newline.
    """

    text = dump(record, Dumper=SafeDumper, default_flow_style=True,
                sort_keys=False, width=2 ** 31 - 1)
    return text if text.endswith('\n') else text + '\n'


# The end.
