from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import click
from pydantic import ValidationError

from ..database import get_db, make_session_factory
from ..errors import EXIT_IO, EXIT_USAGE, SymotError


class CommandFailed(click.ClickException):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


@contextmanager
def cli_errors():
    """Turn domain and I/O errors into click exceptions with the stable exit codes."""
    try:
        yield
    except SymotError as exc:
        raise CommandFailed(str(exc), exc.exit_code) from exc
    except ValidationError as exc:
        raise CommandFailed(str(exc), EXIT_USAGE) from exc
    except OSError as exc:
        where = f"{exc.filename}: " if exc.filename else ""
        raise CommandFailed(f"{where}{exc.strerror or exc}", EXIT_IO) from exc


@dataclass
class AppState:
    registry_url: Optional[str] = None
    _factory: object = field(default=None, repr=False)

    @contextmanager
    def registry(self):
        """Yields a session, or None when no registry is configured."""
        if self.registry_url is None:
            yield None
            return
        if self._factory is None:
            self._factory = make_session_factory(self.registry_url)
        with get_db(self._factory) as db:
            yield db


pass_state = click.make_pass_decorator(AppState, ensure=True)


def float_list(value: str) -> list[float]:
    items = [part.strip() for part in value.split(",") if part.strip()]
    try:
        return [float(item) for item in items]
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
