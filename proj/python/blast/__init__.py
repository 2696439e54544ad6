"""Fit interatomic potentials to reference properties.

Thin layer over the compiled ``_blast`` core. Parameters, structures and
documents are plain dicts; structures use the same JSON layout as the job
files (``species``, ``positions``, optional ``cell``, ``periodic``, ``label``).
"""

import json as _json

from . import _blast
from ._blast import (
    ComputeError,
    Error,
    IllegalTransition,
    NotFound,
    ParseError,
    ProtocolError,
    ValidationError,
)

__all__ = [
    "ComputeError",
    "Error",
    "IllegalTransition",
    "JobService",
    "NotFound",
    "ParseError",
    "ProtocolError",
    "ValidationError",
    "dimer",
    "energy",
    "forces",
    "frame_decode",
    "frame_encode",
    "list_models",
    "model_detail",
    "parameter_space",
    "parse_targets",
    "read_xyz",
    "relax_lattice",
    "write_xyz",
]


def list_models():
    return _json.loads(_blast.list_models())


def model_detail(model_id, species):
    return _json.loads(_blast.model_detail(model_id, list(species)))


def parameter_space(model_id, species):
    return _json.loads(_blast.parameter_space(model_id, list(species)))


def dimer(species_a, species_b, r):
    return {"label": f"dimer_{species_a}_{species_b}", "species": [species_a, species_b],
            "positions": [[0.0, 0.0, 0.0], [float(r), 0.0, 0.0]]}


def energy(model_id, species, params, structure):
    """Total energy in eV."""
    return _blast.energy(model_id, list(species), _json.dumps(params), _json.dumps(structure))


def forces(model_id, species, params, structure):
    """Per-atom forces in eV/Å as a list of [fx, fy, fz]."""
    return [list(f) for f in _blast.forces(model_id, list(species), _json.dumps(params), _json.dumps(structure))]


def relax_lattice(model_id, species, params, lattice, element):
    """(lattice constant in Å, energy per atom in eV) of a relaxed cubic lattice."""
    return _blast.relax_lattice(model_id, list(species), _json.dumps(params), lattice, element)


def read_xyz(path):
    return _json.loads(_blast.read_xyz(str(path)))


def write_xyz(structures):
    return _blast.write_xyz(_json.dumps(list(structures)))


def parse_targets(targets):
    return _json.loads(_blast.parse_targets(_json.dumps(targets)))


def frame_encode(message):
    return _blast.frame_encode(_json.dumps(message))


def frame_decode(frame):
    return _json.loads(_blast.frame_decode(bytes(frame)))


class JobService:
    """Job store rooted at ``home``; see the HTTP API for the same operations."""

    def __init__(self, home):
        self._svc = _blast.JobService(str(home))

    def submit(self, config, base_dir=""):
        return self._svc.submit(_json.dumps(config), str(base_dir))

    def get(self, job_id):
        return _json.loads(self._svc.get(job_id))

    def list(self):
        return _json.loads(self._svc.list())

    def start(self, job_id):
        return _json.loads(self._svc.start(job_id))

    def cancel(self, job_id):
        return _json.loads(self._svc.cancel(job_id))

    def restart(self, job_id):
        return _json.loads(self._svc.restart(job_id))

    def wait(self, job_id):
        return _json.loads(self._svc.wait(job_id))

    def result(self, job_id):
        return _json.loads(self._svc.result(job_id))

    def events(self, job_id):
        """All events of a job; blocks until it reaches a terminal status."""
        return _json.loads(self._svc.events(job_id))

    def run(self, config, base_dir=""):
        """Submit, start and wait; returns the result document."""
        job_id = self.submit(config, base_dir)
        self.start(job_id)
        record = self.wait(job_id)
        if record["status"] != "completed":
            raise Error(f"job {job_id} {record['status']}: {record.get('error', '')}")
        return self.result(job_id)
