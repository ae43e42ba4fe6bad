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

from functools import wraps

import psutil


class ResourceReport(object):
    """Memory, CPU and thread usage of a process, the running one unless
    another is given."""

    def __init__(self, process=None):
        self._process = process

    @property
    def process(self):
        if self._process is None:
            self._process = psutil.Process()
        return self._process

    def memory_and_cpu(self, prefix="proc"):
        proc = self.process
        memory = proc.memory_info()
        metrics = {prefix + ".memory.rss": memory.rss,
                   prefix + ".memory.vms": memory.vms,
                   prefix + ".cpu.percent": proc.cpu_percent()}
        # Not every platform reports threads.
        threads = getattr(proc, "num_threads", None)
        if threads is not None:
            metrics[prefix + ".threads"] = threads()
        return metrics

    def cpu_times(self, prefix="proc"):
        """User and system CPU seconds spent so far."""
        times = self.process.cpu_times()
        return {prefix + ".cpu.user": times.user,
                prefix + ".cpu.system": times.system}


def deltas(sample):
    """Wrap the counter source C{sample} so that every call reports the
    change since the previous call. The first call reports nothing."""
    previous = []

    @wraps(sample)
    def changes():
        current = sample()
        last = previous.pop() if previous else None
        previous.append(current)
        if last is None:
            return {}
        return dict((name, value - last[name])
                    for name, value in current.items())
    return changes


def resource_reporters(process=None):
    """Metric sources for the resources used by C{process}."""
    report = ResourceReport(process)
    return [report.memory_and_cpu, deltas(report.cpu_times)]
