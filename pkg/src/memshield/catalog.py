"""Canonical CIC-MalMem-2022 feature catalog and malware taxonomy.

Feature names follow the dataset CSV header spelling (``svcscan.*``); the
three features that are constant across the published dataset are flagged
so preprocessing can drop them.
"""

from dataclasses import dataclass

from .errors import CategoryParseError

BENIGN_LABEL = 0
MALWARE_LABEL = 1

MALWARE_TYPES = ("TrojanHorse", "Spyware", "Ransomware")


@dataclass(frozen=True)
class FeatureEntry:
    name: str
    category: str
    invariant: bool = False


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered feature list shared by every instance of a dataset."""

    entries: tuple[FeatureEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def index(self, name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.name == name:
                return i
        raise KeyError(name)

    def subset(self, names: tuple[str, ...]) -> "FeatureCatalog":
        by_name = {e.name: e for e in self.entries}
        return FeatureCatalog(tuple(by_name[n] for n in names))

    def drop_invariant(self) -> "FeatureCatalog":
        return FeatureCatalog(tuple(e for e in self.entries if not e.invariant))

    @property
    def invariant_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries if e.invariant)


def _entries(category: str, names: str, invariant: frozenset[str] = frozenset()):
    return tuple(
        FeatureEntry(n, category, n in invariant) for n in names.split()
    )


_INVARIANT = frozenset(
    {
        "pslist.nprocs64bit",
        "handles.nport",
        "svcscan.interactive_process_services",
    }
)

MALMEM_CATALOG = FeatureCatalog(
    _entries("Callbacks", "callbacks.nanonymous callbacks.ncallbacks callbacks.ngeneric")
    + _entries("DLLlist", "dlllist.avg_dlls_per_proc dlllist.ndlls")
    + _entries(
        "Handles",
        "handles.avg_handles_per_proc handles.ndesktop handles.ndirectory"
        " handles.nevent handles.nfile handles.nhandles handles.nkey"
        " handles.nmutant handles.nport handles.nsection handles.nsemaphore"
        " handles.nthread handles.ntimer",
        _INVARIANT,
    )
    + _entries(
        "LDR modules",
        "ldrmodules.not_in_init ldrmodules.not_in_init_avg ldrmodules.not_in_load"
        " ldrmodules.not_in_load_avg ldrmodules.not_in_mem ldrmodules.not_in_mem_avg",
    )
    + _entries(
        "MalFind",
        "malfind.commitCharge malfind.ninjections malfind.protection"
        " malfind.uniqueInjections",
    )
    + _entries("Modules", "modules.nmodules")
    + _entries(
        "PsList",
        "pslist.avg_handlers pslist.avg_threads pslist.nppid pslist.nproc"
        " pslist.nprocs64bit",
        _INVARIANT,
    )
    + _entries(
        "Psxview",
        "psxview.not_in_csrss_handles psxview.not_in_csrss_handles_false_avg"
        " psxview.not_in_deskthrd psxview.not_in_deskthrd_false_avg"
        " psxview.not_in_eprocess_pool psxview.not_in_eprocess_pool_false_avg"
        " psxview.not_in_ethread_pool psxview.not_in_ethread_pool_false_avg"
        " psxview.not_in_pslist psxview.not_in_pslist_false_avg"
        " psxview.not_in_pspcid_list psxview.not_in_pspcid_list_false_avg"
        " psxview.not_in_session psxview.not_in_session_false_avg",
    )
    + _entries(
        "SVCscan",
        "svcscan.fs_drivers svcscan.interactive_process_services"
        " svcscan.kernel_drivers svcscan.nactive svcscan.nservices"
        " svcscan.process_services svcscan.shared_process_services",
        _INVARIANT,
    )
)


@dataclass(frozen=True)
class SubtypeInfo:
    name: str
    malware_type: str
    count: int  # published instance count in the full dataset


SUBTYPES: tuple[SubtypeInfo, ...] = (
    SubtypeInfo("Zeus", "TrojanHorse", 1950),
    SubtypeInfo("Emotet", "TrojanHorse", 1967),
    SubtypeInfo("Refroso", "TrojanHorse", 2000),
    SubtypeInfo("Scar", "TrojanHorse", 2000),
    SubtypeInfo("Reconyc", "TrojanHorse", 1570),
    SubtypeInfo("180Solutions", "Spyware", 2000),
    SubtypeInfo("CoolWebSearch", "Spyware", 2000),
    SubtypeInfo("Gator", "Spyware", 2200),
    SubtypeInfo("Transponder", "Spyware", 2410),
    SubtypeInfo("TIBS", "Spyware", 1410),
    SubtypeInfo("Conti", "Ransomware", 1988),
    SubtypeInfo("MAZE", "Ransomware", 1958),
    SubtypeInfo("Pysa", "Ransomware", 1717),
    SubtypeInfo("Ako", "Ransomware", 2000),
    SubtypeInfo("Shade", "Ransomware", 2128),
)

SUBTYPE_NAMES: tuple[str, ...] = tuple(s.name for s in SUBTYPES)
SUBTYPE_COUNTS: dict[str, int] = {s.name: s.count for s in SUBTYPES}
TYPE_OF_SUBTYPE: dict[str, str] = {s.name: s.malware_type for s in SUBTYPES}

BENIGN_COUNT = 29298
MALWARE_COUNT = sum(SUBTYPE_COUNTS.values())
TOTAL_INSTANCES = BENIGN_COUNT + MALWARE_COUNT

# Tokens actually observed in the CSV category field vary in spelling and
# case across sources; the canonical-count check in the loader is the ground
# truth, so the alias table errs on the permissive side.
_TYPE_ALIASES = {
    "trojan": "TrojanHorse",
    "trojanhorse": "TrojanHorse",
    "trojan horse": "TrojanHorse",
    "spyware": "Spyware",
    "ransomware": "Ransomware",
}

_SUBTYPE_ALIASES = {name.lower(): name for name in SUBTYPE_NAMES}
_SUBTYPE_ALIASES.update(
    {
        "cws": "CoolWebSearch",
        "emonet": "Emotet",
    }
)


def resolve_malware_type(token: str) -> str:
    try:
        return _TYPE_ALIASES[token.strip().lower()]
    except KeyError:
        raise CategoryParseError(token, "unknown malware type token") from None


def resolve_subtype(token: str) -> str:
    try:
        return _SUBTYPE_ALIASES[token.strip().lower()]
    except KeyError:
        raise CategoryParseError(token, "unknown malware subtype token") from None


def subtype_order_key(name: str) -> tuple[int, str]:
    """Deterministic ordering: published subtypes first, extras alphabetical."""
    if name in SUBTYPE_COUNTS:
        return (SUBTYPE_NAMES.index(name), name)
    return (len(SUBTYPE_NAMES), name)
