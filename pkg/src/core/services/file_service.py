import logging
import tempfile
from pathlib import Path

from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    retry_unless_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from src.core.config import FileConfig, get_settings
from src.core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class FileService:
    """
    Atomic file writes with retry.

    Payloads are written to a temporary file in the target directory and renamed into place,
    so readers never observe a partially written graph, dataset or result file.
    """

    def __init__(self, settings: FileConfig | None = None) -> None:
        self.settings = settings or get_settings().file_service

    def _validate_path(self, path: str | Path) -> Path:
        path_str = str(path)
        if not path_str or "\x00" in path_str:
            msg = f"Invalid output path {path_str!r}."
            raise ConfigurationError(msg)
        return Path(path_str)

    def _retrying(self) -> Retrying:
        return Retrying(
            retry=retry_if_exception_type(OSError) & retry_unless_exception_type(PermissionError),
            wait=wait_exponential(multiplier=self.settings.retry_backoff, max=2),
            stop=stop_after_attempt(self.settings.retry_max),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )

    def _write_once(self, data: bytes, target: Path) -> None:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            dir=target.parent, prefix=f".{target.name}.", suffix=".tmp", delete=False
        ) as tmp:
            tmp.write(data)
            tmp_path = Path(tmp.name)
        try:
            tmp_path.replace(target)
        except OSError:
            tmp_path.unlink(missing_ok=True)
            raise

    def write_bytes(self, data: bytes, path: str | Path) -> Path:
        """Atomically replace `path` with `data`; transient OS errors are retried."""
        target = self._validate_path(path)
        for attempt in self._retrying():
            with attempt:
                self._write_once(data, target)
        logger.info("Wrote %d bytes to %s", len(data), target)
        return target

    def write_text(self, content: str, path: str | Path) -> Path:
        return self.write_bytes(content.encode("utf-8"), path)

    def read_bytes(self, path: str | Path) -> bytes:
        target = self._validate_path(path)
        data = target.read_bytes()
        logger.debug("Read %d bytes from %s", len(data), target)
        return data
