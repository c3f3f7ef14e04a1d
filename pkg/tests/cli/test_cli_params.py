"""
trajlet - tests.cli.test_cli_params

Every trajlet command's click parameters match its function signature.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from trajlet.cli import main

from . import assert_click_params_match_function


COMMANDS = (
    'gen-data', 'sim', 'train', 'embed', 'query', 'eval', 'baseline',
    'sweep', 'params',
)


class TestCLIParams:
    """
    Test that CLI command parameters match their function signatures.
    """

    def test_all_commands_listed(self):
        assert sorted(main.list_commands(None)) == sorted(COMMANDS)


    def test_gen_data_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'gen-data'))


    def test_sim_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'sim'))


    def test_train_command_params(self):
        """
        train carries the most flags, each one forwarded to build_configs.
        """

        assert_click_params_match_function(main.get_command(None, 'train'))


    def test_embed_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'embed'))


    def test_query_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'query'))


    def test_eval_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'eval'))


    def test_baseline_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'baseline'))


    def test_sweep_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'sweep'))


    def test_params_command_params(self):
        assert_click_params_match_function(main.get_command(None, 'params'))


# The end.
