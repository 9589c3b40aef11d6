import re

_SEGMENT_SPLIT = re.compile(r"[/:]")
_ID_FORBIDDEN = re.compile(r"[:#\s]")


def get_next_sequence_id(list_of_ids, width: int = 8) -> str:
    """
    Finds the next id in a zero-padded decimal sequence.

    Args:
        list_of_ids: Existing ids (e.g. ['00000001', '00000002']). Non-numeric ids are ignored.
        width: Number of digits to pad to.

    Returns:
        The id following the highest existing number, '00000001' for an empty sequence.
    """
    numbers_found = {0}
    for item in list_of_ids:
        if item.isdigit():
            numbers_found.add(int(item))
    return f"{max(numbers_found) + 1:0{width}d}"


def derive_id(iri: str) -> str:
    """
    Derive an object id from an IRI: the fragment if present, otherwise the last
    non-empty path segment, lowercased.

    Returns:
        The id, or an empty string when nothing usable remains.
    """
    text = iri.strip()
    if "#" in text:
        base, _, fragment = text.partition("#")
        text = fragment or base
    # Drop query strings, they never identify the resource
    text = text.split("?", 1)[0]
    segments = [s for s in _SEGMENT_SPLIT.split(text) if s]
    if not segments:
        return ""
    candidate = segments[-1].lower()
    if _ID_FORBIDDEN.search(candidate):
        return ""
    return candidate
