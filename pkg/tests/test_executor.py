import asyncio
import threading
import time

from contextvars import copy_context

import pytest

from levsim.context import RunSettings, settings
from levsim.executor import ContextPreservingExecutor, parallel_map


def test_executor_preserves_context():
    executor = ContextPreservingExecutor(1)
    ctx = RunSettings()
    ctx.threads = 5

    all_ok, message = False, ""

    def stage_1():
        asyncio.run(stage_2())

    async def stage_2():
        nonlocal all_ok, message

        ctx.threads = 23
        loop = asyncio.get_running_loop()
        task1 = loop.run_in_executor(executor, stage_3)
        task2 = asyncio.sleep(0.05)
        await asyncio.gather(task1, task2)
        if all_ok:
            all_ok = ctx.threads == 23
            if not all_ok:
                message = "value not reset to in-task value after thread call"

    def stage_3():
        nonlocal all_ok, message
        all_ok = ctx.threads == 23
        if not all_ok:
            message = f"value is {ctx.threads} in thread worker. Expecting 23!"
        ctx.threads = 42

    copy_context().run(stage_1)
    executor.shutdown()

    assert all_ok, message


def test_executor_gives_each_task_its_own_copy():
    ctx = RunSettings()
    ctx.strict = True

    def task(value):
        assert ctx.strict is True
        ctx.threads = value
        time.sleep(0.01)
        return ctx.threads

    with ContextPreservingExecutor(4) as executor:
        futures = [executor.submit(task, i) for i in range(20)]
        assert [future.result() for future in futures] == list(range(20))
    assert ctx.threads is None


def test_executor_context_against_a_bare_thread():
    ctx = RunSettings()
    ctx.strict = True
    with ContextPreservingExecutor(1) as executor:
        assert executor.submit(lambda: ctx.strict).result() is True
    seen = []
    thread = threading.Thread(target=lambda: seen.append(ctx.strict))
    thread.start()
    thread.join()
    assert seen == [False]


@pytest.mark.parametrize(["threads"], [(1,), (4,)])
def test_parallel_map_keeps_order(threads):
    def slow_square(value):
        time.sleep((10 - value) * 0.002)
        return value * value

    assert parallel_map(slow_square, range(10), threads) == [i * i for i in range(10)]


@pytest.mark.parametrize(["threads"], [(1,), (3,)])
def test_parallel_map_propagates_settings(threads):
    def job():
        settings.strict = True

        def read(_):
            strict = settings.strict
            settings.strict = False
            return strict

        results = parallel_map(read, range(6), threads)
        return results, settings.strict

    results, after = copy_context().run(job)
    assert results == [True] * 6
    assert after is True


def test_parallel_map_uses_configured_threads():
    names = set()

    def job():
        settings.threads = 3

        def record(_):
            names.add(threading.current_thread().name)
            time.sleep(0.01)

        parallel_map(record, range(9))

    copy_context().run(job)
    assert 1 < len(names) <= 3
    assert threading.current_thread().name not in names


def test_parallel_map_of_nothing():
    assert parallel_map(str, [], 4) == []
