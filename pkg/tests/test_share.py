import os

import pytest
from hypothesis import given, strategies as st

from cellgate.gateway.share import ShareForbidden, SharePathError, ShareStore


@pytest.fixture
def store(tmp_path):
    return ShareStore(str(tmp_path / "root"), own_owner="me")


def test_put_get_list(store):
    entry = store.put("me", "docs/a.txt", b"hello", "text/plain")
    assert entry.size == 5
    data, content_type = store.get("me", "docs/a.txt")
    assert data == b"hello" and content_type == "text/plain"
    listing = store.list("me")
    assert [e.path for e in listing] == ["docs/a.txt"]


def test_content_type_guessed(store):
    store.put("me", "pic.png", b"\x89PNG")
    _, content_type = store.get("me", "pic.png")
    assert content_type == "image/png"


def test_foreign_owner_write_forbidden(store):
    with pytest.raises(ShareForbidden):
        store.put("alice", "f.txt", b"x")


def test_read_any_owner(store, tmp_path):
    os.makedirs(store.root + "/alice", exist_ok=True)
    with open(store.root + "/alice/shared.txt", "wb") as fh:
        fh.write(b"from alice")
    data, _ = store.get("alice", "shared.txt")
    assert data == b"from alice"
    assert "alice" in store.owners()


@pytest.mark.parametrize(
    "bad",
    [
        "../outside",
        "a/../../b",
        "a//b",
        "/absolute",
        "a\\b",
        "a\x00b",
        ".",
        "..",
        "",
        "nested/../../../etc/passwd",
    ],
)
def test_adversarial_paths_rejected_fs_untouched(store, bad):
    before = _tree(store.root)
    with pytest.raises(SharePathError):
        store.put("me", bad, b"x")
    with pytest.raises((SharePathError, KeyError)):
        store.get("me", bad)
    assert _tree(store.root) == before


@pytest.mark.parametrize("bad_owner", ["..", "a/b", "", "x\x00", "a:b"])
def test_adversarial_owners_rejected(store, bad_owner):
    with pytest.raises(SharePathError):
        store.put(bad_owner, "f.txt", b"x")


@given(
    st.text(
        alphabet=st.sampled_from("ab./\\\x00:"),
        min_size=1,
        max_size=12,
    )
)
def test_property_no_escape(tmp_path_factory, path):
    root = tmp_path_factory.mktemp("share")
    store = ShareStore(str(root), own_owner="me")
    outside_before = set(os.listdir(os.path.dirname(store.root)))
    try:
        store.put("me", path, b"x")
    except SharePathError:
        pass
    else:
        # accepted paths must land inside the owner directory
        produced = []
        for dirpath, _, filenames in os.walk(store.root):
            produced += [os.path.join(dirpath, f) for f in filenames]
        for full in produced:
            assert full.startswith(os.path.join(store.root, "me") + os.sep)
    assert set(os.listdir(os.path.dirname(store.root))) == outside_before


def _tree(root):
    out = []
    for dirpath, dirnames, filenames in os.walk(root):
        for name in filenames:
            out.append(os.path.join(dirpath, name))
    return sorted(out)
