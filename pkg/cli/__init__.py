"""Command-line surface: one subcommand per decomposition family."""

from .commands import (
    cmd_decompose,
    cmd_features,
    cmd_linked,
    cmd_mbss,
    cmd_pls,
    cmd_synth
)

__all__ = [
    'cmd_decompose',
    'cmd_features',
    'cmd_linked',
    'cmd_mbss',
    'cmd_pls',
    'cmd_synth'
]
