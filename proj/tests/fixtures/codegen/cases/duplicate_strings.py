def duplicate_strings(input: List[str]) -> Dict[str, str]:
    return { s: s + s for s in input}
