from contextlib import contextmanager
import csv
import hashlib
from pathlib import Path
import sys


class CSVLogger:
    """Writes comma separated rows with a header line, truncating the file."""

    def __init__(self, filename, columns):
        self.filename = Path(filename)
        self.columns = columns
        self.filename.parent.mkdir(parents=True, exist_ok=True)
        self.file = open(self.filename, 'w', encoding='utf-8', newline='')
        self.writer = csv.writer(self.file, lineterminator='\n')
        self.write(*self.columns)

    def write(self, *args):
        self.writer.writerow(args)

    def close(self):
        self.file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(filename, columns, rows):
    with CSVLogger(filename, columns) as out:
        for row in rows:
            out.write(*row)


@contextmanager
def open_text(path, mode='r'):
    """Opens a UTF-8 text file, `-` selects stdin/stdout."""
    if str(path) == '-':
        yield sys.stdin if 'r' in mode else sys.stdout
        return
    path = Path(path)
    if 'w' in mode:
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, mode, encoding='utf-8', newline='\n' if 'w' in mode else None) as f:
        yield f


def stable_key(*parts):
    """128-bit integer derived from the parts, identical on every platform and run."""
    digest = hashlib.sha256(':'.join(str(p) for p in parts).encode('utf-8')).digest()
    return int.from_bytes(digest[:16], 'little')


def lower_median(values):
    """Lower-middle element of the sorted values (the element itself for odd lengths)."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError('median of an empty sequence')
    return ordered[(len(ordered) - 1) // 2]
