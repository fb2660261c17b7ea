"""Closed table of recognized Android framework APIs and callback mappings.

Anything not listed here is an opaque call: it has no effect on data flow and
returns nothing the analyses can reason about.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

FIND_VIEW_BY_ID = "findViewById"
SET_ON_CLICK_LISTENER = "setOnClickListener"
START_ACTIVITY = "startActivity"
REGISTER_RECEIVER = "registerReceiver"
SEND_BROADCAST = "sendBroadcast"
INTENT_INIT_CLASS = "Intent.<init>(Context,Class)"
INTENT_INIT_ACTION = "Intent.<init>(String)"
INTENT_INIT_EMPTY = "Intent.<init>()"
INTENT_SET_ACTION = "Intent.setAction"
FILTER_INIT_ACTION = "IntentFilter.<init>(String)"

INTENT_CLASS = "android.content.Intent"
FILTER_CLASS = "android.content.IntentFilter"

FRAMEWORK_BASES = frozenset({
    "java.lang.Object",
    "android.app.Activity",
    "androidx.appcompat.app.AppCompatActivity",
    "android.content.BroadcastReceiver",
    "android.app.Service",
})

ON_CREATE = "onCreate(Landroid/os/Bundle;)V"
ON_START = "onStart()V"
ON_RECEIVE = "onReceive(Landroid/content/Context;Landroid/content/Intent;)V"
ON_CLICK = "onClick(Landroid/view/View;)V"


@dataclass(frozen=True)
class CallbackMapping:
    """A registration API whose registered object later receives a callback.

    ``listener_arg`` indexes the invoke's argument registers (the receiver is
    argument 0).  ``param_sources`` gives, for each parameter slot of the
    callback (``this`` first), the registration argument that flows into it.
    """

    api: str
    callback: str
    listener_arg: int
    param_sources: tuple[Optional[int], ...]
    event: str = "click"


@dataclass(frozen=True)
class FrameworkModel:
    # sub-signature (or full ref for constructors) -> API name
    apis: tuple[tuple[str, str], ...]
    callbacks: tuple[CallbackMapping, ...]
    activity_lifecycle: tuple[str, ...] = (ON_CREATE, ON_START)
    receiver_lifecycle: tuple[str, ...] = (ON_RECEIVE,)
    bases: frozenset = FRAMEWORK_BASES

    def __post_init__(self):
        names = {name for _, name in self.apis}
        for cb in self.callbacks:
            if cb.api not in names:
                raise ValueError(f"callback mapping for unrecognized API {cb.api}")

    def api_for(self, ref) -> Optional[str]:
        """Return the API name matched by the MethodRef ``ref``, if any."""
        table = self._table
        if ref.name == "<init>":
            return table.get(str(ref))
        return table.get(ref.sub)

    @cached_property
    def _table(self) -> dict[str, str]:
        return dict(self.apis)

    def callback_for(self, api: str) -> Optional[CallbackMapping]:
        for cb in self.callbacks:
            if cb.api == api:
                return cb
        return None

    def callbacks_named(self, sub: str) -> list[CallbackMapping]:
        return [cb for cb in self.callbacks if cb.callback == sub]

    @property
    def lifecycle(self) -> tuple[str, ...]:
        return self.activity_lifecycle + self.receiver_lifecycle


DEFAULT_FRAMEWORK = FrameworkModel(
    apis=(
        ("findViewById(I)Landroid/view/View;", FIND_VIEW_BY_ID),
        ("setOnClickListener(Landroid/view/View$OnClickListener;)V",
         SET_ON_CLICK_LISTENER),
        ("startActivity(Landroid/content/Intent;)V", START_ACTIVITY),
        ("registerReceiver(Landroid/content/BroadcastReceiver;"
         "Landroid/content/IntentFilter;)Landroid/content/Intent;",
         REGISTER_RECEIVER),
        ("sendBroadcast(Landroid/content/Intent;)V", SEND_BROADCAST),
        ("Landroid/content/Intent;-><init>(Landroid/content/Context;"
         "Ljava/lang/Class;)V", INTENT_INIT_CLASS),
        ("Landroid/content/Intent;-><init>(Ljava/lang/String;)V",
         INTENT_INIT_ACTION),
        ("Landroid/content/Intent;-><init>()V", INTENT_INIT_EMPTY),
        ("setAction(Ljava/lang/String;)Landroid/content/Intent;",
         INTENT_SET_ACTION),
        ("Landroid/content/IntentFilter;-><init>(Ljava/lang/String;)V",
         FILTER_INIT_ACTION),
    ),
    callbacks=(
        # view.setOnClickListener(listener) -> listener.onClick(view)
        CallbackMapping(SET_ON_CLICK_LISTENER, ON_CLICK,
                        listener_arg=1, param_sources=(1, 0)),
    ),
)
