"""Full pipeline: audit, isolate, verify, build circuit, compare against the exact oracle."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .algebra import DEFAULT_SEED
from .circuit import apply_circuit, build_circuit
from .errors import BudgetExceeded
from .isolation import ExactProver, LowestIndexOracle, run_isolation
from .model import CLHInstance, energy_of_state
from .oracle import DEFAULT_BUDGET, ground_energy
from .witness import verify_witness


@dataclass
class RunReport:
    n: int
    m: int
    k: int
    d: int
    epsilon: float
    epsilon_exact: str
    epsilon_exhaustive: bool
    epsilon_per_term: float
    gamma: float
    applicable: bool
    R_bad: int
    ratio: float
    bound_holds: bool
    T: int
    E_kept: float
    interval: tuple[float, float]
    accepted: bool
    oracle_lambda: float | None
    circuit_emitted: bool
    circuit_energy: float | None
    seed: int
    prover: str

    def as_dict(self) -> dict:
        out = asdict(self)
        out["interval"] = list(self.interval)
        return out

    def table(self) -> str:
        rows = [
            ("n, m, k, d", f"{self.n}, {self.m}, {self.k}, {self.d}"),
            ("epsilon", f"{self.epsilon:.6f} ({self.epsilon_exact})"
             + ("" if self.epsilon_exhaustive else " [per-term only]")),
            ("epsilon (per-term sets)", f"{self.epsilon_per_term:.6f}"),
            ("gamma = 2kd*eps", f"{self.gamma:.6f}" + ("" if self.applicable else " [eps >= 1/2: not applicable]")),
            ("|R_bad| / m", f"{self.R_bad}/{self.m} = {self.ratio:.6f}"),
            ("bound holds", str(self.bound_holds)),
            ("iterations T", str(self.T)),
            ("E_kept", f"{self.E_kept:.9f}"),
            ("certified interval", f"[{self.interval[0]:.9f}, {self.interval[1]:.9f}]"),
            ("witness accepted", str(self.accepted)),
            ("oracle lambda", "n/a" if self.oracle_lambda is None else f"{self.oracle_lambda:.9f}"),
            ("circuit emitted", str(self.circuit_emitted)),
            ("circuit energy", "n/a" if self.circuit_energy is None else f"{self.circuit_energy:.9f}"),
            ("prover", self.prover),
            ("seed", str(self.seed)),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{a:<{width}}  {b}" for a, b in rows)


def make_oracle(name: str, budget: int = DEFAULT_BUDGET):
    if name == "exact":
        return ExactProver(budget)
    if name == "lowest":
        return LowestIndexOracle()
    raise ValueError(f"unknown oracle {name!r}")


def pipeline(instance: CLHInstance, seed: int = DEFAULT_SEED, prover: str = "exact",
             budget: int = DEFAULT_BUDGET):
    """Run everything once; returns ``(report, run, ledger, witness)``."""
    run, ledger, witness = run_isolation(instance, make_oracle(prover, budget), seed)
    result = verify_witness(instance, witness)
    lam = None
    try:
        lam = ground_energy(instance, budget)
    except BudgetExceeded:
        pass
    energy = None
    emitted = False
    if result.accepted and instance.total_dim <= budget:
        circ = build_circuit(result.run)
        energy = energy_of_state(instance, apply_circuit(circ, instance, budget))
        emitted = True
    exp = run.expansion
    report = RunReport(
        n=instance.n, m=instance.m, k=ledger.k, d=ledger.d,
        epsilon=float(ledger.epsilon), epsilon_exact=str(ledger.epsilon),
        epsilon_exhaustive=exp.exhaustive, epsilon_per_term=float(exp.per_term_max),
        gamma=float(ledger.gamma), applicable=ledger.applicable,
        R_bad=len(run.R_bad), ratio=float(ledger.ratio), bound_holds=ledger.bound_holds,
        T=run.T, E_kept=run.E_kept, interval=run.interval, accepted=result.accepted,
        oracle_lambda=lam, circuit_emitted=emitted, circuit_energy=energy, seed=seed, prover=prover,
    )
    return report, run, ledger, witness
