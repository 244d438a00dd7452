"""Simulated VoWiFi testbed: network entities, agents and the central controller."""

from .agents import Agent, LocalChannel, SocketChannel
from .controller import AgentUnreachable, Controller
from .entities import Epdg, Ims, StateViolation, Testbed
from .envelope import FramingError, decode_frames, encode_frame, make_envelope

__all__ = ["Agent", "AgentUnreachable", "Controller", "Epdg", "FramingError", "Ims", "LocalChannel",
           "SocketChannel", "StateViolation", "Testbed", "decode_frames", "encode_frame", "make_envelope"]
