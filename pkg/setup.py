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

from glob import glob

from txqkalman import version

from setuptools.command.install import install
from setuptools import find_packages
from setuptools import setup

long_description = """
Synthesis and verification of optimal linear filters for Gaussian quantum
diffusions observed through a heterodyne channel.
"""


class TxPluginInstaller(install):
    def run(self):
        install.run(self)
        # Make sure we refresh the plugin list when installing, so we know
        # we have enough write permissions.
        # see http://twistedmatrix.com/documents/current/core/howto/plugin.html
        from twisted.plugin import IPlugin, getPlugins

        list(getPlugins(IPlugin))

setup(
    cmdclass={'install': TxPluginInstaller},
    name="txQKalman",
    version=version.txqkalman,
    description="Optimal coherent filters for linear quantum diffusions",
    author="txQKalman Developers",
    license="MIT",
    packages=find_packages() + ["twisted.plugins"],
    scripts=glob("./bin/*"),
    long_description=long_description,
    install_requires=[
        "Twisted",
        "zope.interface",
        "psutil",
        "numpy",
        "scipy",
        ],
    tests_require=["mock"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Physics",
        "License :: OSI Approved :: MIT License",
       ],
    )
