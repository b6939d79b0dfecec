import pytest

from awareauto.context import catalog_from_dict, load_bundled_catalog

TEST_CATALOG = {
    "rooms": ["lab"],
    "devices": [
        {
            "target": "lamp a",
            "room": "lab",
            "position": "left bench",
            "interfaces": [
                {"name": "switch", "kind": "query", "params": [], "returns": {"kind": "enum", "values": ["on", "off"]}, "description": "lamp a power"},
                {"name": "switch", "kind": "operation", "params": [{"name": "power", "domain": {"kind": "enum", "values": ["on", "off"]}}], "returns": None, "description": "set lamp a power"},
            ],
        },
        {
            "target": "lamp b",
            "room": "lab",
            "position": "right bench",
            "interfaces": [
                {"name": "switch", "kind": "query", "params": [], "returns": {"kind": "enum", "values": ["on", "off"]}, "description": "lamp b power"},
                {"name": "switch", "kind": "operation", "params": [{"name": "power", "domain": {"kind": "enum", "values": ["on", "off"]}}], "returns": None, "description": "set lamp b power"},
            ],
        },
        {
            "target": "plug c",
            "room": "lab",
            "position": "floor socket",
            "interfaces": [
                {"name": "switch", "kind": "query", "params": [], "returns": {"kind": "enum", "values": ["on", "off"]}, "description": "plug power"},
                {"name": "switch", "kind": "operation", "params": [{"name": "power", "domain": {"kind": "enum", "values": ["on", "off"]}}], "returns": None, "description": "set plug power"},
            ],
        },
        {
            "target": "sense",
            "room": "lab",
            "position": "shelf",
            "interfaces": [
                {"name": "motion", "kind": "query", "params": [], "returns": {"kind": "enum", "values": ["true", "false"]}, "description": "movement seen"},
                {"name": "level", "kind": "query", "params": [], "returns": {"kind": "numeric", "low": 0, "high": 100}, "description": "analog reading"},
            ],
        },
    ],
}


@pytest.fixture(scope="session")
def catalog():
    return load_bundled_catalog()


@pytest.fixture(scope="session")
def lab_catalog():
    return catalog_from_dict(TEST_CATALOG)
