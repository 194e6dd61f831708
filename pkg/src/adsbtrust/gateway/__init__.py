"""HTTP service fabric: feature ingest, guarded services and the ledger RPC."""

from .access import AccessController, AccessRecord, Decision, RpcBridge, RpcError, UnknownMethod, UpstreamError
from .client import GatewayClient, Response
from .fabric import Client, Fabric, FabricError, TxFailed
from .server import (
    MAX_FEATURE_BODY,
    BusyError,
    DeploymentMode,
    FeatureQueue,
    Gateway,
    QueueFull,
    ServiceRequest,
    bootstrap,
)
from .services import ServiceRegistry, UnknownService, decode_frames, default_registry

__all__ = [name for name in dir() if not name.startswith("_")]
