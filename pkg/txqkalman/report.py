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
"""
Periodic progress reports of long Monte-Carlo runs.

A L{MonitorService} polls metric sources on a clock; every source returns a
dictionary of metric values, which are handed to a sink (by default the
Twisted log) in name order.
"""

import logging
import threading

from twisted.application.service import Service
from twisted.internet.defer import maybeDeferred
from twisted.internet.task import LoopingCall
from twisted.python import log


def log_metric(name, value):
    log.msg("%s: %s" % (name, value), logLevel=logging.INFO)


class MonitorService(Service):
    """Poll metric sources every few seconds while running."""

    def __init__(self, prefix="", clock=None, sink=log_metric):
        self.prefix = prefix
        self.clock = clock
        self.sink = sink
        self.loops = []

    def watch(self, source, interval):
        """Poll C{source} every C{interval} seconds.

        Polling begins when the service starts, or immediately if it is
        already running.
        """
        loop = LoopingCall(self.poll, source)
        if self.clock is not None:
            loop.clock = self.clock
        self.loops.append((loop, interval))
        if self.running:
            loop.start(interval, now=True)
        return loop

    def poll(self, source):
        """Hand the metrics of one call of C{source} to the sink; failures
        are logged and polling goes on."""
        d = maybeDeferred(source)
        d.addCallback(self.emit)
        d.addErrback(log.err, "Polling %s failed" %
                     (getattr(source, "__name__", source),))
        return d

    def emit(self, metrics):
        for name in sorted(metrics):
            qualified = "%s.%s" % (self.prefix, name) if self.prefix else name
            self.sink(qualified, metrics[name])
        return metrics

    def startService(self):
        Service.startService(self)
        for loop, interval in self.loops:
            loop.start(interval, now=False)

    def stopService(self):
        for loop, _ in self.loops:
            if loop.running:
                loop.stop()
        Service.stopService(self)


class Progress(object):
    """Count finished trajectory blocks; updated from any thread."""

    def __init__(self, blocks, trajectories):
        self.blocks = blocks
        self.trajectories = trajectories
        self.done_blocks = 0
        self.done_trajectories = 0
        self._lock = threading.Lock()

    def block_done(self, count):
        with self._lock:
            self.done_blocks += 1
            self.done_trajectories += count

    @property
    def finished(self):
        return self.done_blocks >= self.blocks

    def snapshot(self):
        with self._lock:
            return {"blocks.done": self.done_blocks,
                    "blocks.total": self.blocks,
                    "trajectories.done": self.done_trajectories}


def progress_monitor(progress, interval=5.0, sources=(), clock=None,
                     sink=log_metric):
    """Monitor of a simulation: its C{progress} and any extra C{sources},
    reported under C{simulate.}."""
    monitor = MonitorService("simulate", clock, sink)
    monitor.watch(progress.snapshot, interval)
    for source in sources:
        monitor.watch(source, interval)
    return monitor
