def pytest_addoption(parser):
    parser.addoption("--run-long", action="store_true", default=False, help="run hours-scale searches")
