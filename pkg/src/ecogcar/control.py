"""Single-switch scanning control of a simulated car.

Classifier output codes collapse to one switch bit (any recognized movement
is the same trigger). Each pulse advances a 16-point compass scan clockwise
by one step; the current heading is encoded as a 4-bit command word and
written to a device port, and the car integrates its position continuously
at the current heading. Ports log every transmitted word in order; the
loopback port keeps the log in memory, the file and TCP ports additionally
emit one NDJSON line per command.
"""

from __future__ import annotations

import json
import math
import socket
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .classify import DigitalCode

COMPASS_POINTS = (
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
    "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW",
)
_COMPASS_INDEX = {name: i for i, name in enumerate(COMPASS_POINTS)}
STEP_DEG = 22.5


@dataclass(frozen=True)
class SwitchEvent:
    """Converter output for one tick."""

    active: int
    tick_index: int

    def __post_init__(self) -> None:
        if self.active not in (0, 1):
            raise ValueError(f"switch bit must be 0 or 1, got {self.active}")


@dataclass(frozen=True)
class DirectionState:
    """Position on the compass rose; 0 = N, increasing clockwise."""

    rose_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.rose_index <= 15:
            raise ValueError(f"rose_index must be in 0..15, got {self.rose_index}")

    @property
    def compass(self) -> str:
        return COMPASS_POINTS[self.rose_index]


@dataclass(frozen=True)
class HeadingVector:
    """Unit heading, east = +x, north = +y."""

    x: float
    y: float

    def __post_init__(self) -> None:
        norm = self.x * self.x + self.y * self.y
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"heading ({self.x}, {self.y}) is not unit length")


@dataclass(frozen=True)
class CommandWord:
    """4-bit heading command; the value equals the rose index."""

    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value <= 15:
            raise ValueError(f"command word must be in 0..15, got {self.value}")

    @property
    def bits(self) -> str:
        return format(self.value, "04b")

    @classmethod
    def from_bits(cls, bits: str) -> "CommandWord":
        return cls(int(bits, 2))


@dataclass
class CarState:
    x_m: float = 0.0
    y_m: float = 0.0
    heading: HeadingVector = HeadingVector(0.0, 1.0)
    speed_mps: float = 0.5

    def __post_init__(self) -> None:
        if self.speed_mps < 0:
            raise ValueError("speed must be >= 0")


def convert_code_to_switch(code: DigitalCode) -> int:
    """All three recognized movements are the same trigger; 00 is idle."""
    return 0 if code is DigitalCode.CODE_00 else 1


def heading_for(rose_index: int) -> HeadingVector:
    theta = math.radians(rose_index * STEP_DEG)
    return HeadingVector(math.sin(theta), math.cos(theta))


def advance_direction(state: DirectionState) -> tuple[DirectionState, HeadingVector]:
    """One clockwise step on the rose; returns the new state and its heading."""
    new = DirectionState((state.rose_index + 1) % 16)
    return new, heading_for(new.rose_index)


def heading_to_compass(x: float, y: float) -> str:
    """Nearest of the 16 wind names for a direction vector.

    The angle is measured clockwise from north; an exact sector boundary
    (11.25 degrees past a point) rounds to the higher rose index.
    """
    if x == 0 and y == 0:
        raise ValueError("zero vector has no direction")
    angle = math.degrees(math.atan2(x, y)) % 360.0
    return COMPASS_POINTS[int(math.floor(angle / STEP_DEG + 0.5)) % 16]


def compass_to_command(point: str) -> CommandWord:
    if point not in _COMPASS_INDEX:
        raise ValueError(f"unknown compass point {point!r}")
    return CommandWord(_COMPASS_INDEX[point])


def command_to_compass(word: CommandWord) -> str:
    return COMPASS_POINTS[word.value]


def step_car(car: CarState, dt_s: float) -> CarState:
    """Advance position along the current heading; heading and speed unchanged."""
    if dt_s < 0:
        raise ValueError("dt must be >= 0")
    return CarState(
        x_m=car.x_m + car.heading.x * car.speed_mps * dt_s,
        y_m=car.y_m + car.heading.y * car.speed_mps * dt_s,
        heading=car.heading,
        speed_mps=car.speed_mps,
    )


class PortClosedError(RuntimeError):
    pass


class DevicePort:
    """Ordered command log plus an optional write-through sink.

    ``transmit`` appends to the log only after the sink write succeeds, so
    a failed write leaves the log unchanged.
    """

    kind = "base"

    def __init__(self) -> None:
        self._open = False
        self.log: list[dict] = []

    @property
    def is_open(self) -> bool:
        return self._open

    def open(self) -> "DevicePort":
        self._open = True
        return self

    def close(self) -> None:
        self._open = False

    def __enter__(self) -> "DevicePort":
        return self.open()

    def __exit__(self, *exc) -> None:
        self.close()

    def _write(self, line: str) -> None:
        pass

    def transmit(self, word: CommandWord, tick: int) -> dict:
        if not self._open:
            raise PortClosedError(f"{self.kind} port is closed")
        entry = {"tick": tick, "word": word.bits, "compass": command_to_compass(word)}
        self._write(json.dumps(entry) + "\n")
        self.log.append(entry)
        return entry


class LoopbackPort(DevicePort):
    kind = "loopback"


class FilePort(DevicePort):
    """Appends one NDJSON line per transmitted command."""

    kind = "file"

    def __init__(self, path: str | Path) -> None:
        super().__init__()
        self.path = Path(path)
        self._fh = None

    def open(self) -> "FilePort":
        self._fh = open(self.path, "a")
        return super().open()

    def close(self) -> None:
        super().close()
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _write(self, line: str) -> None:
        self._fh.write(line)
        self._fh.flush()


class TcpPort(DevicePort):
    """Sends the same NDJSON framing to a TCP sink."""

    kind = "tcp"

    def __init__(self, host: str, port: int, timeout_s: float = 5.0) -> None:
        super().__init__()
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self._sock: socket.socket | None = None

    def open(self) -> "TcpPort":
        self._sock = socket.create_connection(
            (self.host, self.port), timeout=self.timeout_s
        )
        return super().open()

    def close(self) -> None:
        super().close()
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _write(self, line: str) -> None:
        self._sock.sendall(line.encode())


def transmit(port: DevicePort, word: CommandWord, tick: int) -> dict:
    """Write one command word through a port; returns the logged entry."""
    return port.transmit(word, tick)


@dataclass(frozen=True)
class TelemetryFrame:
    """State snapshot emitted once per simulation tick."""

    tick: int
    x_m: float
    y_m: float
    rose_index: int
    compass: str
    last_code: str
    last_switch: int

    def to_dict(self) -> dict:
        return {
            "type": "frame",
            "tick": self.tick,
            "x_m": self.x_m,
            "y_m": self.y_m,
            "rose_index": self.rose_index,
            "compass": self.compass,
            "last_code": self.last_code,
            "last_switch": self.last_switch,
        }


class ControlSimulator:
    """Single-writer state machine joining codes, scanning and the car.

    Producers enqueue events from any thread-free context; only ``step``
    mutates state, consuming at most one queued event per tick. A pulse
    advances the rose by exactly one step and transmits the new command
    word; without a pulse the state is untouched while the car keeps
    moving at the current heading.
    """

    def __init__(
        self,
        port: DevicePort,
        tick_hz: float = 20.0,
        speed_mps: float = 0.5,
        start_rose_index: int = 0,
    ) -> None:
        if tick_hz <= 0:
            raise ValueError("tick_hz must be > 0")
        self.port = port
        self.tick_hz = tick_hz
        self.tick = 0
        self.state = DirectionState(start_rose_index)
        self.car = CarState(heading=heading_for(start_rose_index), speed_mps=speed_mps)
        self.last_code = DigitalCode.CODE_00
        self.last_switch = 0
        self.switch_events: list[SwitchEvent] = []
        self._queue: deque = deque()

    def submit_code(self, code: DigitalCode) -> None:
        self._queue.append(("code", code))

    def submit_switch(self) -> None:
        """A direct manual activation, bypassing the code converter."""
        self._queue.append(("switch", None))

    @property
    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> TelemetryFrame:
        bit = 0
        if self._queue:
            kind, payload = self._queue.popleft()
            if kind == "code":
                self.last_code = payload
                bit = convert_code_to_switch(payload)
            else:
                bit = 1
        self.last_switch = bit
        self.switch_events.append(SwitchEvent(active=bit, tick_index=self.tick))

        if bit:
            self.state, heading = advance_direction(self.state)
            self.car.heading = heading
            transmit(self.port, compass_to_command(self.state.compass), self.tick)

        self.car = step_car(self.car, 1.0 / self.tick_hz)
        frame = TelemetryFrame(
            tick=self.tick,
            x_m=self.car.x_m,
            y_m=self.car.y_m,
            rose_index=self.state.rose_index,
            compass=self.state.compass,
            last_code=self.last_code.bits,
            last_switch=self.last_switch,
        )
        self.tick += 1
        return frame

    def run(self, n_ticks: int) -> list[TelemetryFrame]:
        return [self.step() for _ in range(n_ticks)]
