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

from collections import namedtuple

import mock
from twisted.trial.unittest import TestCase

from txqkalman.process import ResourceReport, deltas, resource_reporters


Memory = namedtuple("Memory", "rss vms")
Times = namedtuple("Times", "user system")


class TestResourceReport(TestCase):
    """Test resource reporting of the simulation process."""

    def test_memory_and_cpu_without_threads(self):
        """
        If the process does not expose C{num_threads} the number of threads
        is left out.
        """
        proc = mock.Mock()
        proc.memory_info.return_value = Memory(rss=2048, vms=8192)
        proc.cpu_percent.return_value = 97.5
        proc.num_threads = None
        result = ResourceReport(process=proc).memory_and_cpu()
        self.assertEqual({"proc.cpu.percent": 97.5,
                          "proc.memory.rss": 2048,
                          "proc.memory.vms": 8192}, result)

    def test_memory_and_cpu_with_threads(self):
        proc = mock.Mock()
        proc.memory_info.return_value = Memory(rss=1, vms=2)
        proc.cpu_percent.return_value = 0.0
        proc.num_threads.return_value = 5
        result = ResourceReport(process=proc).memory_and_cpu(
            prefix="simulate")
        proc.memory_info.assert_called_once_with()
        proc.num_threads.assert_called_once_with()
        self.assertEqual(5, result["simulate.threads"])
        self.assertEqual(1, result["simulate.memory.rss"])

    def test_cpu_counters(self):
        proc = mock.Mock()
        proc.cpu_times.return_value = Times(user=1.5, system=0.25)
        result = ResourceReport(process=proc).cpu_times()
        proc.cpu_times.assert_called_once_with()
        self.assertEqual({"proc.cpu.user": 1.5, "proc.cpu.system": 0.25},
                         result)

    def test_current_process(self):
        """Without a process the running one is inspected."""
        result = ResourceReport().cpu_times()
        self.assertTrue(result["proc.cpu.user"] >= 0)


class TestCounters(TestCase):

    def test_deltas(self):
        """Counters are reported as differences between calls."""
        values = iter([{"a": 1, "b": 10}, {"a": 4, "b": 10},
                       {"a": 6, "b": 13}])

        def sample():
            return next(values)

        report = deltas(sample)
        self.assertEqual({}, report())
        self.assertEqual({"a": 3, "b": 0}, report())
        self.assertEqual({"a": 2, "b": 3}, report())
        self.assertEqual("sample", report.__name__)

    def test_resource_reporters(self):
        proc = mock.Mock()
        proc.memory_info.return_value = Memory(rss=1, vms=2)
        proc.cpu_percent.return_value = 0.0
        proc.num_threads.return_value = 3
        proc.cpu_times.side_effect = [Times(1.0, 1.0), Times(3.0, 1.5)]
        memory, counters = resource_reporters(proc)
        self.assertEqual(3, memory()["proc.threads"])
        self.assertEqual({}, counters())
        self.assertEqual({"proc.cpu.user": 2.0, "proc.cpu.system": 0.5},
                         counters())
