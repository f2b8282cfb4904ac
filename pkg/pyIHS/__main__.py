"""Allow ``python -m pyIHS``."""

from .harness.cli import main

raise SystemExit(main())
