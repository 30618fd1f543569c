"""
Help text generation for the solver CLI.
"""

from typing import List


class HelpGenerator:
    """Generates help text for CLI commands and options."""

    def __init__(self, commands: List[str]):
        self.commands = list(commands)

    def generate_help_text(self) -> str:
        """Generate comprehensive help text."""
        sections = [
            self._generate_usage_header(),
            self._generate_commands_section(),
            self._generate_options_section(),
            self._generate_exit_codes_section(),
            self._generate_environment_section(),
            self._generate_examples_section(),
        ]
        return "\n\n".join(sections)

    def _generate_usage_header(self) -> str:
        return f"""usage: msf_solve.py {{{','.join(self.commands)}}} [--config CONFIG] [--out DIR]
                   [--sweep CONFIG ...] [-v] [--no-log-file]

Structure-preserving finite-volume solver for Maxwell-Stefan-Fourier cross-diffusion"""

    def _generate_commands_section(self) -> str:
        return """commands:
  run                   Integrate a configuration; writes fields.csv, diagnostics.csv, manifest.json
  check-matrix          Print coercivity certificates and group-inverse identities for the matrix model
  convergence           Run the configured refinement ladders and print observed orders"""

    def _generate_options_section(self) -> str:
        return """options:
  -h, --help            Show this help message and exit
  -c, --config CONFIG   Configuration file (.toml text or a previous run's manifest.json)
  -o, --out DIR         Output directory (default: $MSF_OUTPUT_DIR, then output.dir)
  --sweep CONFIG ...    Run several configurations concurrently (run only), each into DIR/<config stem>/
  -v, --verbose         Debug logging (Newton iterations, damping)
  --no-log-file         Log to the console only"""

    def _generate_exit_codes_section(self) -> str:
        return """exit codes:
  0    success
  1    configuration error, or a failed check / convergence criterion
  2    a structural gate (positivity, entropy, temperature, conservation) failed
  3    run aborted after exhausting the time-step halvings
  130  interrupted"""

    def _generate_environment_section(self) -> str:
        return """environment:
  MSF_LOG_LEVEL         Console log level (default INFO for the CLI)
  MSF_LOG_DIR           Directory of msf_solver.log (default logs/)
  MSF_OUTPUT_DIR        Default output directory"""

    def _generate_examples_section(self) -> str:
        return """examples:
  ./msf_solve.py run --config configs/mixing.toml --out results/mixing
  ./msf_solve.py check-matrix --config configs/maxwell_stefan_check.toml
  ./msf_solve.py convergence --config configs/smooth.toml
  ./msf_solve.py run --sweep configs/heating.toml configs/cooling.toml --out results/sweep"""
