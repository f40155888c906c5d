"""Interactive WebSocket service running the aggregated controller.

One simulation session ticks at 30 Hz; frames are broadcast to every
connected client, and command messages are applied between ticks with
last-writer-wins mailbox semantics.  The tick function is shared with the
offline replay path so a recorded command script reproduces a served
session exactly.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import sim
from .qa_router import Aggregator

DEFAULT_SKILL_COMMAND = "walk forward"
DEFAULT_TASK_COMMAND = "go to the red block"


@dataclass
class SessionState:
    world: sim.WorldState
    aggregator: Aggregator
    skill_command: str = DEFAULT_SKILL_COMMAND
    task_command: str = DEFAULT_TASK_COMMAND
    tick: int = 0


def new_session(policies, embedding, scorer=None, env_config=None, seed=0):
    world = sim.reset(env_config or sim.EnvConfig(), np.random.default_rng(seed))
    return SessionState(world=world, aggregator=Aggregator(policies, embedding, scorer=scorer))


def session_tick(session: SessionState) -> dict:
    """Advance the session one control tick and return the frame message.

    Deterministic in (session state, command strings); both the live
    service and offline replay call exactly this function.
    """
    action, sel, _goal = session.aggregator.step(
        session.world, session.skill_command, session.task_command
    )
    session.world = sim.step(session.world, action)
    session.tick += 1
    return make_frame(session, sel)


def make_frame(session: SessionState, selection) -> dict:
    c = session.world.character
    return {
        "type": "frame",
        "tick": session.tick,
        "character": {
            "p": [float(c.p[0]), float(c.p[1])],
            "theta": float(c.theta),
            "v": [float(c.v[0]), float(c.v[1])],
            "h": float(c.h),
            "a": float(c.arm),
        },
        "objects": [
            {"id": o.id, "color": o.color, "p": [float(o.p[0]), float(o.p[1])],
             "updot": o.updot}
            for o in session.world.objects
        ],
        "active_policy": selection.policy_id,
        "active_object": selection.object_id,
        "scores": {
            "task": {c_.policy_id: s for c_, s in
                     zip(session.aggregator.policy_cards, selection.task_scores)},
            "object": dict(zip([o.id for o in session.world.objects],
                               selection.object_scores)),
        },
    }


def apply_command(session: SessionState, message: dict):
    """Returns None on success, else an error reply dict."""
    kind = message.get("type")
    text = message.get("text", "")
    if kind == "skill_command":
        if not str(text).strip():
            return {"type": "error", "msg": "empty skill command"}
        session.skill_command = str(text)
        return None
    if kind == "task_command":
        if not str(text).strip():
            return {"type": "error", "msg": "empty task command"}
        session.task_command = str(text)
        return None
    return {"type": "error", "msg": f"unknown message type {kind!r}"}


def replay_script(session: SessionState, script, n_ticks: int):
    """Offline replay: script maps tick index -> list of command messages
    applied before that tick.  Returns the list of frame messages."""
    frames = []
    for t in range(n_ticks):
        for msg in script.get(t, []):
            apply_command(session, msg)
        frames.append(session_tick(session))
    return frames


class SessionServer:
    """Single shared session, many viewers."""

    def __init__(self, session: SessionState, record_path=None, tick_rate=30.0):
        self.session = session
        self.clients = set()
        self.mailbox = {}  # message type -> latest message (last-writer-wins)
        self.record_path = record_path
        self.tick_rate = tick_rate
        self._trace = open(record_path, "w") if record_path else None
        self._stop = asyncio.Event()

    def stop(self):
        self._stop.set()

    async def handler(self, ws):
        self.clients.add(ws)
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send(json.dumps({"type": "error", "msg": "malformed JSON"}))
                    continue
                if not isinstance(msg, dict) or msg.get("type") not in (
                    "skill_command", "task_command",
                ):
                    await ws.send(json.dumps(
                        {"type": "error", "msg": f"unknown message type {msg.get('type') if isinstance(msg, dict) else None!r}"}
                    ))
                    continue
                if not str(msg.get("text", "")).strip():
                    await ws.send(json.dumps({"type": "error", "msg": "empty command"}))
                    continue
                self.mailbox[msg["type"]] = msg
        finally:
            self.clients.discard(ws)

    async def tick_loop(self):
        period = 1.0 / self.tick_rate
        next_deadline = time.monotonic()
        while not self._stop.is_set():
            pending = list(self.mailbox.values())
            self.mailbox.clear()
            for msg in pending:
                apply_command(self.session, msg)
                if self._trace:
                    self._trace.write(json.dumps(
                        {"kind": "command", "tick": self.session.tick, "message": msg}) + "\n")
            frame = session_tick(self.session)
            if self._trace:
                self._trace.write(json.dumps({"kind": "frame", "frame": frame}) + "\n")
            payload = json.dumps(frame)
            dead = []
            for ws in self.clients:
                try:
                    await ws.send(payload)
                except Exception:  # noqa: BLE001 - drop broken connections
                    dead.append(ws)
            for ws in dead:
                self.clients.discard(ws)
            next_deadline += period
            delay = next_deadline - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_deadline = time.monotonic()
        if self._trace:
            self._trace.close()

    async def run(self, port):
        import websockets

        async with websockets.serve(self.handler, "127.0.0.1", port):
            await self.tick_loop()


def serve_blocking(args):
    from .skill_embed import SkillEmbedding
    from .ppo import GaussianPolicy

    embedding = SkillEmbedding.load(args.embed)
    policies = {
        "facing": GaussianPolicy.load(args.policy_facing),
        "location": GaussianPolicy.load(args.policy_location),
        "strike": GaussianPolicy.load(args.policy_strike),
    }
    session = new_session(policies, embedding, seed=args.seed)
    server = SessionServer(session, record_path=args.record)
    print(f"serving on ws://127.0.0.1:{args.port}")
    asyncio.run(server.run(args.port))
