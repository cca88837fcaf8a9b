"""balbot: digital twin of a two-wheeled balancing robot.

Modeling, motor identification, PI/LQR controller synthesis, classical
SISO analysis, deterministic nonlinear simulation with safety logic, and
a live telemetry/teleop session server.
"""

__version__ = "0.1.0"
