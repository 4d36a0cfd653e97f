"""Certification and solution toolkit for two-component Hammerstein systems.

The package computes verifiable constants for systems of the form

    u(t) = int_0^1 k1(t,s) g1(s) f1(s, u(s), u'(s), v(s), v'(s)) ds
    v(t) = int_0^1 k2(t,s) g2(s) f2(s, u(s), u'(s), v(s), v'(s)) ds

checks cone fixed-point index conditions for existence, multiplicity and
non-existence of solutions, builds third-order three-point Green kernels,
and solves the systems numerically with cone-membership validation.
"""

from __future__ import annotations

__version__ = "0.1.0"
