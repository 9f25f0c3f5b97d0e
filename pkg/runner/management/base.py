from django.core.management.base import BaseCommand, CommandError

from gamecore.constants import AC_DIRECTIONS
from gamecore.exceptions import GameError, InvalidConfig
from harness.exceptions import DataError
from kinematics.constants import TARGET_BANDS

from ..config import load_run_config
from ..constants import CONFIG_SCHEMA_VERSION, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER


class RunnerCommand(BaseCommand):
    """
    Shared flags and error handling. Subclasses implement ``run(options)``;
    domain errors leave as CommandError with the matching exit code.
    """

    def get_version(self):
        return f"drivegames config schema {CONFIG_SCHEMA_VERSION}"

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON run config; flags override it")
        parser.add_argument("--seed", type=int)

        game = parser.add_argument_group("game")
        game.add_argument("--horizon", type=float, help="seconds")
        game.add_argument("--period", type=float, help="seconds per stage")
        game.add_argument("--discount", type=float)
        game.add_argument("--n-samples", type=int, help="trajectories per maneuver")
        game.add_argument("--grid-types", help="comma-separated type grid, e.g. -1,0,1")
        game.add_argument("--target-band", choices=TARGET_BANDS, help="end-speed band for generated trajectories")
        game.add_argument("--continuation-stages", type=int)
        game.add_argument("--ac-direction", choices=AC_DIRECTIONS)
        game.add_argument("--l1-expectation", action="store_const", const=True)
        game.add_argument("--mspe-lhs-safety", action="store_const", const=True)
        game.add_argument("--sspe-step-level", action="store_const", const=True)
        game.add_argument("--no-fallback", dest="equilibrium_fallback", action="store_const", const=False)
        game.add_argument("--robust-slack", type=int)
        game.add_argument("--qlk-lambda", type=float)

        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run_config(self, options, **flags):
        game = {
            "horizon": options.get("horizon"),
            "period": options.get("period"),
            "discount": options.get("discount"),
            "n_samples": options.get("n_samples"),
            "type_grid": options.get("grid_types"),
            "target_band": options.get("target_band"),
            "continuation_stages": options.get("continuation_stages"),
            "ac_condition_direction": options.get("ac_direction"),
            "l1_expectation": options.get("l1_expectation"),
            "mspe_lhs_safety": options.get("mspe_lhs_safety"),
            "sspe_step_level": options.get("sspe_step_level"),
            "equilibrium_fallback": options.get("equilibrium_fallback"),
            "robust_slack": options.get("robust_slack"),
        }
        return load_run_config(
            options.get("config"),
            game=game,
            seed=options.get("seed"),
            qlk_lambda=options.get("qlk_lambda"),
            **flags,
        )

    def run(self, options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            self.run(options)
        except DataError as exc:
            raise CommandError(str(exc), returncode=EXIT_DATA) from exc
        except InvalidConfig as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
        except GameError as exc:
            raise CommandError(str(exc), returncode=EXIT_SOLVER) from exc
        except (ValueError, OSError) as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
