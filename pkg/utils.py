import csv
import hashlib
import logging
import os
import sys

from dotenv import load_dotenv

__version__ = "0.3.0"

DEFAULT_CONFIG = os.path.join("config", "device.cfg")
CSV_DIGITS = 12


def base_path():
    """Return the project root directory (works for both dev and the bundled CLI)."""
    if getattr(sys, 'frozen', False):
        return os.path.dirname(sys.executable)
    return os.path.dirname(os.path.abspath(__file__))


def load_environment():
    """Load .env next to the project root; existing environment variables win."""
    load_dotenv(os.path.join(base_path(), '.env'))


def default_config_path() -> str:
    """QCRSIM_CONFIG if set, else the shipped device config."""
    load_environment()
    return os.getenv("QCRSIM_CONFIG", os.path.join(base_path(), DEFAULT_CONFIG))


def configure_logging(verbose: int = 0):
    """Root handler on stderr. -v gives INFO, -vv DEBUG; QCRSIM_LOG_LEVEL overrides."""
    level_name = os.getenv("QCRSIM_LOG_LEVEL")
    if level_name:
        level = getattr(logging, level_name.upper(), logging.WARNING)
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def fmt(value) -> str:
    """Fixed float formatting so identical runs give byte-identical CSV."""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return f"{float(value):.{CSV_DIGITS}g}"


def write_csv(path: str, header: list, rows) -> str:
    """Write rows with fixed formatting; returns the path."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv_columns(path: str) -> dict:
    """Read a numeric CSV into {column: list[float]}."""
    with open(path, newline='') as f:
        reader = csv.DictReader(f)
        columns = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                columns[name].append(float(row[name]))
    return columns


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            h.update(chunk)
    return h.hexdigest()
