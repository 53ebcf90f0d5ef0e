"""Event system for training and experiment orchestration.

Provides the EventBus and event classes that decouple the trainer from
logging, manifest bookkeeping and progress reporting.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class Event:
    """Base class for all engine events."""
    pass

# ============================================================================
# TRAINING EVENTS
# ============================================================================

@dataclass
class TrainingStarted(Event):
    """Fired once before the first optimizer step."""
    run_id: str
    epochs: int
    steps_per_epoch: int
    parameter_count: int


@dataclass
class EpochCompleted(Event):
    """Fired after every epoch with the mean training and validation loss."""
    run_id: str
    epoch: int
    train_loss: float
    val_loss: float
    learning_rate: float


@dataclass
class TrainingFinished(Event):
    """Fired after the last epoch."""
    run_id: str
    steps: int
    seconds: float

# ============================================================================
# MATRIX EVENTS
# ============================================================================

@dataclass
class RunCompleted(Event):
    """Fired when one (architecture, seed) entry of a matrix finishes."""
    architecture: str
    seed: int
    stage: str
    seconds: float = 0.0


@dataclass
class RunFailed(Event):
    """Fired when one (architecture, seed) entry fails; the matrix continues."""
    architecture: str
    seed: int
    stage: str
    error: Dict[str, object] = field(default_factory=dict)

# ============================================================================
# EVENT BUS
# ============================================================================

@dataclass
class ListenerEntry:
    """Represents a listener with metadata for priority and management."""
    listener: Callable
    priority: int = 0  # Higher priority = executed first
    name: str = ""     # Optional name for debugging


class EventBus:
    """EventBus with listener priorities and exception isolation.

    Features:
    - Exception isolation: One failing listener cannot break others
    - Unsubscribe support
    - Safe iteration: listeners may unsubscribe during dispatch
    """

    def __init__(self):
        """Initialize the event bus."""
        # event_type -> list of ListenerEntry (sorted by priority)
        self.listeners: Dict[type, List[ListenerEntry]] = defaultdict(list)
        self._failure_counts: Dict[str, int] = defaultdict(int)

    def subscribe(self, event_type: type, listener: Callable, priority: int = 0, name: str = "") -> None:
        """Register a listener for the given event type.

        Args:
            event_type: The event class to listen for
            listener: Function to call when event is dispatched
            priority: Higher values executed first (default: 0)
            name: Optional name for debugging (default: "")
        """
        entry = ListenerEntry(listener=listener, priority=priority, name=name)
        self.listeners[event_type].append(entry)
        self.listeners[event_type].sort(key=lambda e: e.priority, reverse=True)

        logger.debug("Subscribed listener %s for %s (priority: %d)",
                     name or str(listener), event_type.__name__, priority)

    def unsubscribe(self, event_type: type, listener: Callable) -> bool:
        """Remove a listener from the event type.

        Returns:
            True if listener was found and removed, False otherwise
        """
        listeners = self.listeners.get(event_type, [])
        for i, entry in enumerate(listeners):
            if entry.listener is listener:
                listeners.pop(i)
                return True
        return False

    def dispatch(self, event: Event) -> None:
        """Dispatch an event to all registered listeners safely.

        Listener failures are logged and counted; dispatch continues.

        Args:
            event: The event instance to dispatch
        """
        event_type = event.__class__
        for entry in list(self.listeners.get(event_type, [])):
            try:
                entry.listener(event)
            except Exception as e:
                listener_name = entry.name or getattr(entry.listener, "__name__", str(entry.listener))
                self._failure_counts[listener_name] += 1
                logger.error(
                    "Listener %s failed while handling %s: %s",
                    listener_name, event_type.__name__, e,
                    exc_info=True
                )

    def get_listener_count(self, event_type: Optional[type] = None) -> int:
        """Get the number of listeners, optionally for one event type."""
        if event_type:
            return len(self.listeners.get(event_type, []))
        return sum(len(listeners) for listeners in self.listeners.values())

    def get_failure_counts(self) -> Dict[str, int]:
        """Return listener name -> number of failed dispatches."""
        return dict(self._failure_counts)

    def clear(self) -> None:
        """Remove all listeners from the event bus."""
        self.listeners.clear()
        self._failure_counts.clear()
