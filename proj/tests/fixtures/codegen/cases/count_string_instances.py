def count_string_instances(input: List[str]) -> Dict[str, int]:
    return { s: input.count(s) for s in input}
