# Copyright (C) 2024 txQKalman Developers
#
# Permission is hereby granted, free of charge, to any person obtaining
# a copy of this software and associated documentation files (the
# "Software"), to deal in the Software without restriction, including
# without limitation the rights to use, copy, modify, merge, publish,
# distribute, sublicense, and/or sell copies of the Software, and to
# permit persons to whom the Software is furnished to do so, subject to
# the following conditions:
#
# The above copyright notice and this permission notice shall be
# included in all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT.
# IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY
# CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION OF CONTRACT,
# TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE
# SOFTWARE OR THE USE OR OTHER DEALINGS IN THE SOFTWARE.

import configparser
import getopt
import os
import sys
from dataclasses import dataclass

from twisted.python import usage

from txqkalman import version
from txqkalman.riccati import GRID_TOLERANCE


TRUE_VALUES = ("1", "yes", "true", "on")


class ConfigError(usage.UsageError):
    """Run settings that violate their constraints."""


def float_list(value):
    """Coerce C{"a,b,c"} to a list of floats."""
    if isinstance(value, (list, tuple)):
        return [float(item) for item in value]
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise ValueError("expected a comma separated list of numbers")
    return [float(item) for item in items]

float_list.coerceDoc = "Comma separated numbers."


class OptionsGlue(usage.Options):
    """Options that may also be read from a config file (C{--config}).

    Items of the C{[qkalman]} section apply to every subcommand, items of
    the section named by C{config_section} to this one; options given on
    the command line win.
    """

    optParameters = [
        ["config", "c", None, "Config file (ini format) with defaults."]]

    config_section = "qkalman"

    def __init__(self):
        for klass in self.__class__.__mro__:
            if klass is OptionsGlue:
                break
            for parameter in klass.__dict__.get("optParameters", []):
                name, short = parameter[:2]
                if name == "config" or short == "c":
                    raise ValueError("--config/-c is reserved for the "
                                     "config file")
        self.command_line = set()
        super(OptionsGlue, self).__init__()

    def opt_config(self, path):
        self["config"] = path

    opt_c = opt_config

    def parseOptions(self, options=None):
        """Note which options the command line sets, then parse."""
        if options is None:
            options = sys.argv[1:]
        try:
            given, _ = getopt.getopt(options, self.shortOpt, self.longOpt)
        except getopt.error as e:
            raise usage.UsageError(str(e))
        for flag, _ in given:
            name = flag.lstrip("-")
            self.command_line.add(self.synonyms.get(name, name))
        super(OptionsGlue, self).parseOptions(options=options)

    def postOptions(self):
        path = self["config"]
        if path is None:
            return
        if not os.path.exists(path):
            raise ConfigError("config file %s does not exist" % (path,))
        parser = configparser.RawConfigParser()
        parser.read(path)
        self.configure(parser)

    def overridden_option(self, name):
        """Whether the command line set C{name}."""
        return name in self.command_line

    def configure(self, parser):
        """Apply the common section, then the subcommand's own."""
        for section in ("qkalman", self.config_section):
            if parser.has_section(section):
                for name, value in parser.items(section):
                    self.apply_config_item(name, value)

    def apply_config_item(self, name, value):
        if self.overridden_option(name):
            return
        if name in self.longOpt:
            # A flag.
            self[name] = value.strip().lower() in TRUE_VALUES
            return
        if name + "=" not in self.longOpt:
            return
        handler = self._dispatch.get(name)
        if isinstance(handler, usage.CoerceParameter):
            try:
                value = handler.coerce(value)
            except ValueError as e:
                raise ConfigError("%s = %r: %s" % (name, value, e))
        elif handler is not None:
            handler(name, value)
            return
        self[name] = value


class ModelOptions(OptionsGlue):

    optParameters = [
        ["model", "m", None, "Model file (JSON)."],
        ["out", "o", ".", "Directory for reports and artifacts."],
        ]

    def postOptions(self):
        super(ModelOptions, self).postOptions()
        if self["model"] is None:
            raise ConfigError("a model file is required (--model)")


class ValidateOptions(ModelOptions):
    """Check the structural constraints of a model."""

    config_section = "validate"


class GridOptions(ModelOptions):

    optParameters = [
        ["t-end", "t", None, "Time horizon [3/gamma or 3].", float],
        ["step", "s", None,
         "Riccati integration step [0.01/gamma or 0.01].", float],
        ]


class SynthesizeOptions(GridOptions):
    """Synthesize the optimal filter."""

    config_section = "synthesize"

    optFlags = [
        ["classical", None,
         "Also synthesize the filter without vacuum noise."],
        ]


class SimulateOptions(GridOptions):
    """Check a synthesized filter by Monte-Carlo simulation."""

    config_section = "simulate"

    optParameters = [
        ["dt", None, None, "Simulation step [step/10].", float],
        ["n-traj", "n", 20000, "Number of trajectories.", int],
        ["seed", None, 1979, "Master random seed.", int],
        ["checkpoints", None, None,
         "Comparison times [{0.5,1,2,3}/gamma or quarters of t-end].",
         float_list],
        ["workers", "w", 1, "Threads simulating trajectory blocks.", int],
        ["perturb-gain", None, None,
         "Also run the filter with gain (1 + EPS) K.", float],
        ]

    optFlags = [
        ["dump-records", None,
         "Write the heterodyne records of the first trajectories."],
        ]


class KernelsCheckOptions(GridOptions):
    """Check composition and positivity of the filter kernels."""

    config_section = "kernels-check"

    optParameters = [
        ["seed", None, 1979, "Random seed of the sweeps.", int],
        ["splits", None, 20, "Random Chapman-Kolmogorov splits.", int],
        ["draws", None, 100, "Random Bochner draws.", int],
        ]


class SelftestOptions(OptionsGlue):
    """Run the acceptance suite."""

    config_section = "selftest"

    optParameters = [
        ["out", "o", None, "Directory for the report."],
        ["workers", "w", 1, "Threads simulating trajectory blocks.", int],
        ]

    optFlags = [
        ["tamper-gain", None,
         "Flip the sign of the synthesized gain (negative control)."],
        ]


class QKalmanOptions(usage.Options):
    """Synthesize and verify optimal coherent filters."""

    synopsis = "Usage: qkalman [options] <command> [command options]"

    optFlags = [
        ["verbose", "v", "Log diagnostics to standard error."],
        ]

    subCommands = [
        ["validate", None, ValidateOptions, ValidateOptions.__doc__],
        ["synthesize", None, SynthesizeOptions, SynthesizeOptions.__doc__],
        ["simulate", None, SimulateOptions, SimulateOptions.__doc__],
        ["kernels-check", None, KernelsCheckOptions,
         KernelsCheckOptions.__doc__],
        ["selftest", None, SelftestOptions, SelftestOptions.__doc__],
        ]

    def opt_version(self):
        """Print the version and exit."""
        print("qkalman %s" % (version.txqkalman,))
        sys.exit(0)

    def postOptions(self):
        if self.subCommand is None:
            raise usage.UsageError("a command is required")


@dataclass(frozen=True)
class RunConfig(object):
    """Settings of one run, with defaults taken from the model."""

    model: object
    t_end: float
    step: float
    dt: float = 0.001
    n_traj: int = 20000
    seed: int = 1979
    out_dir: str = "."
    checkpoints: tuple = ()
    workers: int = 1
    dump_records: bool = False
    perturb_gain: float = None
    classical: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError("step must be positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.dt > self.step:
            raise ConfigError("dt must not exceed step")
        if not self.t_end > 0:
            raise ConfigError("t-end must be positive")
        if self.n_traj < 1:
            raise ConfigError("n-traj must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for checkpoint in self.checkpoints:
            if not 0 <= checkpoint <= self.t_end:
                raise ConfigError("checkpoint %r is outside [0, %r]" %
                                  (checkpoint, self.t_end))
        if self.perturb_gain is not None and self.perturb_gain == 0:
            raise ConfigError("perturb-gain must be nonzero")


def default_step(model):
    """Riccati step: a hundredth of the relaxation time of an oscillator."""
    if model.oscillator is not None:
        return 0.01 / model.oscillator.gamma
    return 0.01


def on_grid(t, step):
    """The multiple of C{step} nearest to C{t}, at least one step.

    C{t} itself is returned when it already is a grid point.
    """
    position = t / step
    count = max(1, int(round(position)))
    if abs(count - position) <= GRID_TOLERANCE * max(1.0, position):
        return t
    return count * step


def default_horizon(model, step):
    if model.oscillator is not None:
        return on_grid(3.0 / model.oscillator.gamma, step)
    return on_grid(3.0, step)


def default_checkpoints(model, t_end, step):
    if model.oscillator is not None:
        gamma = model.oscillator.gamma
        times = [c / gamma for c in (0.5, 1.0, 2.0, 3.0)]
    else:
        times = [t_end / 4.0, t_end / 2.0, t_end]
    checkpoints = []
    for t in times:
        t = on_grid(t, step)
        if t <= t_end * (1 + 1e-12) and t not in checkpoints:
            checkpoints.append(t)
    return tuple(checkpoints)


def build_run_config(options, model):
    """Combine parsed subcommand options with the loaded model.

    Unset grid settings follow the model: the step scales with the
    oscillator's relaxation time, C{dt} is a tenth of the step, and the
    default horizon and checkpoints are moved onto the step grid.
    """
    step = options.get("step")
    if step is None:
        step = default_step(model)
    dt = options.get("dt")
    if dt is None:
        dt = step / 10.0
    t_end = options.get("t-end")
    if t_end is None:
        t_end = default_horizon(model, step)
    checkpoints = options.get("checkpoints")
    if checkpoints is None:
        checkpoints = default_checkpoints(model, t_end, step)
    return RunConfig(
        model=model,
        t_end=float(t_end),
        step=float(step),
        dt=float(dt),
        n_traj=int(options.get("n-traj", 20000)),
        seed=int(options.get("seed", 1979)),
        out_dir=options.get("out") or ".",
        checkpoints=tuple(float(c) for c in checkpoints),
        workers=int(options.get("workers", 1)),
        dump_records=bool(options.get("dump-records", False)),
        perturb_gain=options.get("perturb-gain"),
        classical=bool(options.get("classical", False)))
