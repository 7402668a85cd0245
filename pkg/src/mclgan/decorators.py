import functools
import logging

logger = logging.getLogger("mclgan")


def experimental(func):
    """Informs about use of untested functionality"""

    @functools.wraps(func)
    def wrapper_experimental(*args, **kwargs):
        logger.warning("Calling %s, which is untested/experimental", func.__name__)
        return func(*args, **kwargs)

    return wrapper_experimental


def log_failure(func):
    """In case of exception, log the call before re-raising"""

    @functools.wraps(func)
    def wrapper_try(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception:
            args_repr = [repr(a) for a in args]
            kwargs_repr = [f"{k}={v!r}" for k, v in kwargs.items()]
            logger.error("Exception during call %s(%s)", func.__name__, ", ".join(args_repr + kwargs_repr))
            raise

    return wrapper_try
