"""Adversarial testing of VoWiFi user equipment over IKEv2, EAP-AKA and SIP."""

__version__ = "0.1.0"
