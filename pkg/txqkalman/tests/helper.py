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

import json

import numpy as np

from txqkalman.model import OscillatorModel, oscillator_to_general


def oscillator(omega=1.0, gamma=1.0, nu=1.0, sigma0=3.0, hbar=1.0):
    """Signal and channel of an open oscillator."""
    return oscillator_to_general(OscillatorModel(
        omega=omega, gamma=gamma, nu=nu, sigma0=sigma0, hbar=hbar))


def random_complex(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) +
            1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def random_psd(rng, size, rank=None):
    factor = random_complex(rng, size, rank or size)
    return factor @ np.conj(factor).T


def write_document(testcase, document):
    """Write a JSON model document to a fresh file of C{testcase}."""
    path = testcase.mktemp() + ".json"
    with open(path, "w") as f:
        if isinstance(document, str):
            f.write(document)
        else:
            json.dump(document, f)
    return path


class FakeStream(object):
    """Collects what is written to it."""

    def __init__(self):
        self.data = []

    def write(self, data):
        self.data.append(data)

    def flush(self):
        pass

    def getvalue(self):
        return "".join(self.data)
