"""Desk-scale digital twin of the OpenScout v1.1 mobile robot.

Provides an MQTT v3.1.1 subset broker and codec, a ROS2-message-subset
wire interface, an emulation of the onboard control loop, a calibrated
skid-steer plant model, and a scenario/teleop harness.
"""

__version__ = "0.1.0"
