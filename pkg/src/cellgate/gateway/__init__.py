from .app import GatewayRuntime, create_app  # noqa: F401
