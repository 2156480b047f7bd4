#!/usr/bin/env python
"""
Smoke test for the single-copy product testing toolkit
Verifies all components import and run on tiny inputs
"""
import sys
import os

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def check_imports():
    """Check that all modules can be imported"""
    print("Testing imports...")
    try:
        import qcore, permgroup, bounds, ensembles, protocol, verification, cli  # noqa: F401
        from models import ExperimentReport, ExperimentRun, init_db  # noqa: F401
        print("[OK] All imports successful")
        return True
    except Exception as e:
        print(f"[ERROR] Import error: {e}")
        return False


def check_config():
    """Check configuration"""
    print("\nTesting configuration...")
    try:
        from config import TOLERANCES, SIZE_CAPS, EXIT_CODES, PURITY_ESTIMATOR
        assert TOLERANCES['bound_slack'] == 1e-9
        assert SIZE_CAPS['cut_factors'] == 20
        assert EXIT_CODES == {'ok': 0, 'failure': 1, 'usage': 2}
        assert PURITY_ESTIMATOR['groups'] == 8
        print("[OK] Configuration loaded correctly")
        return True
    except Exception as e:
        print(f"[ERROR] Configuration error: {e}")
        return False


def check_database():
    """Check the run ledger on an in-memory database"""
    print("\nTesting database...")
    try:
        from models import get_session, record_run, ExperimentRun
        url = 'sqlite:///:memory:'
        record_run(url, 'verify', 42, 0, {'seed': 42}, {'schema': 1})
        db = get_session(url)
        count = db.query(ExperimentRun).count()
        db.close()
        print(f"[OK] Run ledger initialized (current runs: {count})")
        return True
    except Exception as e:
        print(f"[ERROR] Database error: {e}")
        return False


def check_states():
    """Check state construction and distances"""
    print("\nTesting states...")
    try:
        from qcore import bell_state, distance_to_bp
        distance, cut = distance_to_bp(bell_state())
        assert abs(distance - 2 ** -0.5) < 1e-12
        print(f"[OK] Bell state distance to product states: {distance:.6f}")
        return True
    except Exception as e:
        print(f"[ERROR] State error: {e}")
        return False


def check_tester():
    """Check one run of the product tester"""
    print("\nTesting product tester...")
    try:
        from protocol import StateSource, mp_test
        from qcore import basis_state, rng_stream
        verdict = mp_test(StateSource(basis_state([0, 0], 2)), 2, 2, 0.6, rng_stream(42))
        print(f"[OK] Product tester ran ({verdict.verdict.value}, {verdict.copies_used} copies)")
        return True
    except Exception as e:
        print(f"[ERROR] Tester error: {e}")
        return False


def check_verification():
    """Check one verification suite"""
    print("\nTesting verification suites...")
    try:
        from verification import suite_double_coset
        from qcore import rng_stream
        result = suite_double_coset(rng_stream(42)).to_dict()
        assert result['status'] == 'ok'
        print(f"[OK] {result['name']}: {result['instances']} instances")
        return True
    except Exception as e:
        print(f"[ERROR] Verification error: {e}")
        return False


def main():
    """Run all checks"""
    print("=" * 60)
    print("Single-copy product testing toolkit - Smoke Test")
    print("=" * 60)

    checks = [
        check_imports,
        check_config,
        check_database,
        check_states,
        check_tester,
        check_verification,
    ]

    results = []
    for check in checks:
        try:
            result = check()
            results.append(result)
        except Exception as e:
            print(f"[ERROR] Check failed with exception: {e}")
            results.append(False)

    print("\n" + "=" * 60)
    print(f"Test Results: {sum(results)}/{len(results)} passed")
    print("=" * 60)

    if all(results):
        print("[SUCCESS] All checks passed! Toolkit is ready to use.")
        return 0
    else:
        print("[FAILED] Some checks failed. Please check the errors above.")
        return 1


if __name__ == '__main__':
    sys.exit(main())
