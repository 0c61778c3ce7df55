from memshield import catalog as cat


def test_catalog_has_55_unique_features():
    names = cat.MALMEM_CATALOG.names
    assert len(names) == 55
    assert len(set(names)) == 55


def test_known_categories_only():
    categories = {e.category for e in cat.MALMEM_CATALOG.entries}
    assert categories == {
        "Callbacks", "DLLlist", "Handles", "LDR modules", "MalFind",
        "Modules", "PsList", "Psxview", "SVCscan",
    }


def test_exactly_three_invariant_features():
    assert set(cat.MALMEM_CATALOG.invariant_names) == {
        "pslist.nprocs64bit",
        "handles.nport",
        "svcscan.interactive_process_services",
    }


def test_drop_invariant_leaves_52():
    active = cat.MALMEM_CATALOG.drop_invariant()
    assert len(active) == 52
    assert not active.invariant_names


def test_published_counts_are_balanced():
    assert len(cat.SUBTYPES) == 15
    assert sum(s.count for s in cat.SUBTYPES) == 29298
    assert cat.BENIGN_COUNT == 29298
    assert cat.TOTAL_INSTANCES == 58596
    assert cat.SUBTYPE_COUNTS["Transponder"] == 2410
    assert cat.SUBTYPE_COUNTS["Reconyc"] == 1570
    assert cat.SUBTYPE_COUNTS["TIBS"] == 1410


def test_subtype_type_assignment():
    assert cat.TYPE_OF_SUBTYPE["Zeus"] == "TrojanHorse"
    assert cat.TYPE_OF_SUBTYPE["Transponder"] == "Spyware"
    assert cat.TYPE_OF_SUBTYPE["Shade"] == "Ransomware"
    for s in cat.SUBTYPES:
        assert s.malware_type in cat.MALWARE_TYPES


def test_alias_resolution_is_case_insensitive():
    assert cat.resolve_subtype("transponder") == "Transponder"
    assert cat.resolve_subtype("CWS") == "CoolWebSearch"
    assert cat.resolve_subtype("180solutions") == "180Solutions"
    assert cat.resolve_malware_type("TROJAN") == "TrojanHorse"
    assert cat.resolve_malware_type("Trojan Horse") == "TrojanHorse"


def test_subtype_order_is_published_order_then_alphabetical():
    ordered = sorted(["Shade", "Zeus", "Aardvark", "Transponder"],
                     key=cat.subtype_order_key)
    assert ordered == ["Zeus", "Transponder", "Shade", "Aardvark"]
