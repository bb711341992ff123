"""Execute deployment plans against the simulated environment.

Probe attachment picks a strategy from the service state: co-deploy when the
service is not running yet, blue-green instance replacement when the probe
supports it, in-guest injection otherwise. Blue-green drains the old
instance behind the load balancer before retiring it, so no request is ever
dropped during a transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import AccessDenied, CloudHealthError, EnvError, NoViableMode, SpawnFailed
from .resolver import (DeployProbe, DeploymentPlan, MigrateLoad, Mode,
                       ProbeAssignment, RetireInstance, ServiceDescriptor,
                       ServiceState, SpawnInstance, UndeployProbe)
from .simenv import SimEnv

DRAIN_TIMEOUT_MS = 30_000
DRAIN_STEP_MS = 10

DONE = "Done"
FAILED = "Failed"
SKIPPED = "Skipped"


@dataclass
class ActionOutcome:
    action: dict
    status: str
    started_ms: int
    finished_ms: int
    detail: str = ""

    def to_dict(self) -> dict:
        return {"action": self.action, "status": self.status,
                "started_ms": self.started_ms, "finished_ms": self.finished_ms,
                "detail": self.detail}


@dataclass
class DeploymentReport:
    plan_id: str
    outcomes: list[ActionOutcome] = field(default_factory=list)
    monitoring_gap_ms: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def all_done(self) -> bool:
        return all(o.status == DONE for o in self.outcomes)

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "monitoring_gap_ms": [
                {"metric_id": m, "service_id": s, "gap_ms": g}
                for (m, s), g in sorted(self.monitoring_gap_ms.items())
            ],
        }


@dataclass(frozen=True)
class FunctionalBlock:
    """A service bundled with probes for joint (co-)deployment."""

    service_id: str
    assignments: tuple[ProbeAssignment, ...]
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in self.assignments:
            assert Mode.CO_DEPLOY in a.modes, \
                f"probe {a.probe_kind} does not support co-deployment"


def choose_strategy(service: ServiceDescriptor, assignment: ProbeAssignment) -> Mode:
    """Pick the attachment mode the service state and probe capabilities allow."""
    if service.state is ServiceState.NOT_DEPLOYED:
        if Mode.CO_DEPLOY in assignment.modes:
            return Mode.CO_DEPLOY
        raise NoViableMode(
            f"{assignment.probe_kind} cannot co-deploy with {service.service_id}")
    if Mode.BLUE_GREEN_ATTACH in assignment.modes:
        return Mode.BLUE_GREEN_ATTACH
    if Mode.IN_GUEST_INJECT in assignment.modes:
        return Mode.IN_GUEST_INJECT
    raise NoViableMode(
        f"{assignment.probe_kind} supports no attachment mode for running "
        f"service {service.service_id}")


def co_deploy(block: FunctionalBlock, env: SimEnv) -> list[ActionOutcome]:
    """Deploy a not-yet-running service together with its probes."""
    start = env.clock_ms
    rt = env.services[block.service_id]
    assert rt.descriptor.state is ServiceState.NOT_DEPLOYED, \
        "co-deploy requires a NotDeployed service"
    iid = env.spawn_instance(block.service_id)
    outcomes = [ActionOutcome(SpawnInstance(
        block.service_id, tuple(a.probe_kind for a in block.assignments)).to_dict(),
        DONE, start, env.clock_ms)]
    for a in block.assignments:
        env.activate_probe(a, instance_id=iid)
        outcomes.append(ActionOutcome(DeployProbe(a).to_dict(), DONE,
                                      start, env.clock_ms))
    return outcomes


def attach_blue_green(service_id: str, assignments: Sequence[ProbeAssignment],
                      env: SimEnv) -> list[ActionOutcome]:
    """Spawn an instrumented instance, migrate load, drain, retire the old one."""
    start = env.clock_ms
    rt = env.services[service_id]
    old = rt.lb_target
    try:
        new_iid = env.spawn_instance(service_id)
    except (SpawnFailed, EnvError) as exc:
        return [ActionOutcome(SpawnInstance(service_id).to_dict(), FAILED,
                              start, env.clock_ms, detail=str(exc))]
    outcomes = [ActionOutcome(
        SpawnInstance(service_id, tuple(a.probe_kind for a in assignments)).to_dict(),
        DONE, start, env.clock_ms)]
    # Readiness = probe self-check at spawn time; then cut traffic over.
    for a in assignments:
        env.activate_probe(a, instance_id=new_iid)
    env.migrate_load(service_id, new_iid)
    outcomes.append(ActionOutcome(MigrateLoad(service_id, old or "-", new_iid).to_dict(),
                                  DONE, env.clock_ms, env.clock_ms))
    if old is not None:
        drain_start = env.clock_ms
        forced = False
        while env.in_flight(service_id, old) > 0:
            if env.clock_ms - drain_start >= DRAIN_TIMEOUT_MS:
                forced = True
                break
            env.advance(DRAIN_STEP_MS)
        env.retire_instance(service_id, old)
        outcomes.append(ActionOutcome(
            RetireInstance(service_id, old).to_dict(), DONE, drain_start, env.clock_ms,
            detail="forced retirement after drain timeout" if forced else ""))
    return outcomes


def inject_in_guest(service_id: str, assignment: ProbeAssignment,
                    env: SimEnv) -> list[ActionOutcome]:
    """Attach the probe inside the running instance; no instance churn."""
    if not env.guest_access:
        raise AccessDenied(f"guest access to {service_id!r} is not granted")
    start = env.clock_ms
    rt = env.services[service_id]
    env.activate_probe(assignment, instance_id=rt.lb_target)
    return [ActionOutcome(DeployProbe(assignment).to_dict(), DONE, start, env.clock_ms)]


def apply_plan(plan: DeploymentPlan, env: SimEnv,
               plan_id: str = "plan") -> DeploymentReport:
    """Execute a plan in order; independent action failures don't abort the rest."""
    report = DeploymentReport(plan_id=plan_id)
    plan_start = env.clock_ms
    for action in plan.actions:
        start = env.clock_ms
        if isinstance(action, DeployProbe):
            a = action.assignment
            if a.assignment_id in env.active_assignment_ids():
                report.outcomes.append(ActionOutcome(action.to_dict(), SKIPPED,
                                                     start, env.clock_ms,
                                                     detail="already active"))
                continue
            service = env.services[a.service_id].descriptor
            try:
                mode = choose_strategy(service, a)
                if mode is Mode.CO_DEPLOY:
                    sub = co_deploy(FunctionalBlock(a.service_id, (a,)), env)
                elif mode is Mode.BLUE_GREEN_ATTACH:
                    sub = attach_blue_green(a.service_id, (a,), env)
                else:
                    sub = inject_in_guest(a.service_id, a, env)
            except CloudHealthError as exc:
                report.outcomes.append(ActionOutcome(action.to_dict(), FAILED,
                                                     start, env.clock_ms,
                                                     detail=str(exc)))
                continue
            report.outcomes.extend(sub)
            if any(o.status == FAILED for o in sub):
                continue
            if mode is Mode.BLUE_GREEN_ATTACH:
                report.outcomes.append(ActionOutcome(action.to_dict(), DONE,
                                                     start, env.clock_ms))
            pr = env.probes.get(a.assignment_id)
            activated_at = pr.activated_at if pr else env.clock_ms
            for metric_id in a.metric_ids:
                key = (metric_id, a.service_id)
                report.monitoring_gap_ms[key] = activated_at - plan_start
        elif isinstance(action, UndeployProbe):
            removed = env.deactivate_probe(action.assignment_id)
            report.outcomes.append(ActionOutcome(
                action.to_dict(), DONE if removed else SKIPPED, start, env.clock_ms,
                detail="" if removed else "not active"))
        elif isinstance(action, (SpawnInstance, MigrateLoad, RetireInstance)):
            # Explicit lifecycle actions, normally synthesized by the strategies.
            try:
                if isinstance(action, SpawnInstance):
                    env.spawn_instance(action.service_id)
                elif isinstance(action, MigrateLoad):
                    env.migrate_load(action.service_id, action.to_instance)
                else:
                    env.retire_instance(action.service_id, action.instance_id)
                report.outcomes.append(ActionOutcome(action.to_dict(), DONE,
                                                     start, env.clock_ms))
            except CloudHealthError as exc:
                report.outcomes.append(ActionOutcome(action.to_dict(), FAILED,
                                                     start, env.clock_ms,
                                                     detail=str(exc)))
        else:
            report.outcomes.append(ActionOutcome({"action": repr(action)}, FAILED,
                                                 start, env.clock_ms,
                                                 detail="unknown action type"))
    return report
