"""Simulation and analysis toolkit for a polarization and frequency-bin hyperentangled photon-pair source.

Modules: ``qmath`` (density matrices, concurrence, waveplates), ``spectral``
(frequency grids and two-bin filters), ``source`` (fiber Sagnac source model
and imperfection sweeps), ``homi`` (two-photon interference and fitting),
``tomo`` (polarization tomography, frequency-bin estimator, fidelity bound)
and ``cli``.
"""

__version__ = "0.1.0"
