import os

from dotenv import load_dotenv

# A .env file next to the working directory may override these.
load_dotenv()


def env_str(name: str, default: str) -> str:
    return os.getenv(name, default)


def env_int(name: str, default: int) -> int:
    """
    Reads an integer environment variable, falling back to ``default`` when the
    variable is unset, empty or not a valid integer.

    :param name: Environment variable name.
    :type name: str
    :param default: Value used when the variable is missing or malformed.
    :type default: int
    :return: The parsed integer.
    :rtype: int
    """
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in {"1", "true", "yes", "on"}


def thread_cap() -> int:
    """
    Upper bound on worker threads used by the path runner, from
    ``SLOPE_NEWT_THREADS`` (default: number of CPUs).

    :return: A positive thread count.
    :rtype: int
    """
    return max(1, env_int("SLOPE_NEWT_THREADS", os.cpu_count() or 1))


def long_tests_enabled() -> bool:
    return env_flag("SLOPE_NEWT_LONG_TESTS")
