# ls_sparsify/session.py
from collections import OrderedDict

from ls_sparsify.config_parser import parse_command
from ls_sparsify.runner import execute_command
from ls_sparsify.setup_cache import MAX_SETUPS


class Session:
    """One engine instance: stored reports plus cached preconditioner setups."""

    def __init__(self, max_setups=MAX_SETUPS):
        if max_setups < 1:
            raise ValueError(f"Error: max_setups must be >= 1, got {max_setups}")
        self.reports = []
        self.setups = OrderedDict()
        self.max_setups = max_setups

    def execute(self, command: str):
        parsed_command = parse_command(command)
        return execute_command(parsed_command, self)

    def get_report(self, index):
        """Report by position, or None."""
        if 0 <= index < len(self.reports):
            return self.reports[index]
        return None

    def latest_report(self):
        return self.reports[-1] if self.reports else None
