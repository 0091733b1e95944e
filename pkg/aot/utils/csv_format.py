from typing import Iterable, List, Sequence, TextIO, Union

Cell = Union[int, float, str]


def format_cell(value: Cell) -> str:
    """Format a CSV cell; floats get 17 significant digits for exact round-trips."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    # numpy scalars
    if hasattr(value, "dtype"):
        kind = value.dtype.kind  # type: ignore[union-attr]
        if kind in "iu":
            return str(int(value))  # type: ignore[arg-type]
        if kind == "f":
            return format(float(value), ".17g")  # type: ignore[arg-type]
    return str(value)


def write_rows(
    stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[Cell]]
) -> None:
    """Write a header and rows with `\\n` line endings."""
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(format_cell(cell) for cell in row) + "\n")


def vector_columns(prefix: str, dim: int) -> List[str]:
    return [f"{prefix}{k}" for k in range(dim)]
