"""
trajlet - tests.cli

Helpers for introspecting the click commands of trajlet.cli.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import inspect


def get_command_function_params(cmd):
    """
    The signature parameters of the function behind a click Command.
    ``inspect.signature`` follows ``__wrapped__`` through ``catchall``.
    """

    return inspect.signature(cmd.callback).parameters


def get_command_params(cmd):
    """
    The click parameters of a Command, by destination name.
    """

    return {param.name: param for param in cmd.params if param.name}


def assert_click_params_match_function(cmd):
    """
    Assert that every click parameter of ``cmd`` lands on a function
    parameter, and every function parameter is fed by a click parameter.
    ``ctx``, underscored names, and ``*args``/``**kwargs`` are exempt.
    """

    func_params = get_command_function_params(cmd)
    click_params = get_command_params(cmd)

    skipped = (inspect.Parameter.VAR_POSITIONAL, inspect.Parameter.VAR_KEYWORD)
    for name, param in func_params.items():
        if name == 'ctx' or name.startswith('_') or param.kind in skipped:
            continue
        if name not in click_params:
            raise AssertionError(
                f"Function parameter '{name}' has no corresponding click option"
                f" in command '{cmd.name}'")

    for name in click_params:
        if name not in func_params:
            raise AssertionError(
                f"Click parameter '{name}' has no corresponding function parameter"
                f" in command '{cmd.name}'")


# The end.
