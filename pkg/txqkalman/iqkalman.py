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

from zope.interface import Interface, Attribute


class IModelFormat(Interface):
    name = Attribute("""
        @type name: C{str}
        @ivar name: The name of this kind of model document
        """)

    key = Attribute("""
        @type key: C{str}
        @ivar key: The top-level field that marks a document of this kind.
        """)

    def matches(document):
        """
        Tells whether this format reads C{document}.

        @type document: C{dict}
        @param document: The decoded JSON object.
        """

    def build(document):
        """
        Returns a C{(ModelSchedule, OscillatorModel or None)} pair.

        @type document: C{dict}
        @param document: The decoded JSON object.
        @raise ModelFileError: If a field is missing, unknown or malformed.
        """
